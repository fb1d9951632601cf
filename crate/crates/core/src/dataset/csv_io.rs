use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::{Column, Dataset, FeatureKind, FeatureValue, Schema};
use crate::error::{EbmError, Result};
use crate::scalar::{parse_scalar, Scalar};

struct Table<T> {
    schema: Schema,
    columns: Vec<Column<T>>,
    target: Option<Vec<T>>,
}

fn parse_numeric<T: Scalar>(cell: &str, row: usize, column: &str) -> Result<T> {
    let trimmed = cell.trim();
    if trimmed.is_empty() {
        return Err(EbmError::Parse { row, column: column.into(), message: "missing value".into() });
    }
    match parse_scalar::<T>(trimmed) {
        Some(v) if v.is_finite() => Ok(v),
        _ => Err(EbmError::Parse {
            row,
            column: column.into(),
            message: format!("`{trimmed}` is not a finite number"),
        }),
    }
}

fn read_table<T: Scalar, R: Read>(reader: R, schema: &Schema, need_target: bool) -> Result<Table<T>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::Headers).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let by_name: HashMap<&str, usize> = headers.iter().enumerate().map(|(i, h)| (h, i)).collect();

    let mut feature_pos = Vec::with_capacity(schema.n_features());
    for f in schema.features() {
        let pos = by_name
            .get(f.name.as_str())
            .ok_or_else(|| EbmError::Schema(format!("CSV has no column `{}`", f.name)))?;
        feature_pos.push(*pos);
    }
    let target_pos = match by_name.get(schema.target_name()) {
        Some(&p) => Some(p),
        None if need_target => {
            return Err(EbmError::Schema(format!("CSV has no target column `{}`", schema.target_name())))
        }
        None => None,
    };

    let mut schema = schema.clone();
    let mut columns: Vec<Column<T>> = schema
        .features()
        .iter()
        .map(|f| match f.kind {
            FeatureKind::Numeric => Column::Numeric(Vec::new()),
            FeatureKind::Categorical { .. } => Column::Categorical(Vec::new()),
        })
        .collect();
    let mut target = target_pos.map(|_| Vec::new());

    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        // Data rows are numbered from 1, after the header.
        let row = r + 1;
        for (fi, &pos) in feature_pos.iter().enumerate() {
            let cell = record.get(pos).unwrap_or("");
            let feature = &mut schema.features_mut()[fi];
            match &mut columns[fi] {
                Column::Numeric(v) => v.push(parse_numeric(cell, row, &feature.name)?),
                Column::Categorical(codes) => {
                    let label = cell.trim();
                    let code = match feature.levels.iter().position(|l| l == label) {
                        Some(c) => c,
                        None => {
                            let FeatureKind::Categorical { cardinality } = feature.kind else { unreachable!() };
                            if label.is_empty() || feature.levels.len() >= cardinality {
                                return Err(EbmError::Domain(format!(
                                    "row {row}: unknown category `{label}` for `{}`",
                                    feature.name
                                )));
                            }
                            feature.levels.push(label.to_string());
                            feature.levels.len() - 1
                        }
                    };
                    codes.push(code);
                }
            }
        }
        if let (Some(pos), Some(t)) = (target_pos, target.as_mut()) {
            t.push(parse_numeric(record.get(pos).unwrap_or(""), row, schema.target_name())?);
        }
    }
    Ok(Table { schema, columns, target })
}

/// Reads a dataset from CSV text. Header order is free; extra columns are
/// ignored. Category codes follow the schema's declared levels, then first
/// appearance.
pub fn read_csv<T: Scalar, R: Read>(reader: R, schema: &Schema) -> Result<Dataset<T>> {
    let table = read_table::<T, R>(reader, schema, true)?;
    Dataset::new(table.schema, table.columns, table.target.expect("target required"))
}

pub fn load_csv<T: Scalar>(path: impl AsRef<Path>, schema: &Schema) -> Result<Dataset<T>> {
    read_csv(File::open(path)?, schema)
}

/// Reads feature rows only; the target column may be absent.
pub fn read_feature_rows<T: Scalar, R: Read>(reader: R, schema: &Schema) -> Result<Vec<Vec<FeatureValue<T>>>> {
    let table = read_table::<T, R>(reader, schema, false)?;
    let n = table.columns.first().map_or(0, Column::len);
    Ok((0..n)
        .map(|r| {
            table
                .columns
                .iter()
                .map(|c| match c {
                    Column::Numeric(v) => FeatureValue::Numeric(v[r]),
                    Column::Categorical(k) => FeatureValue::Code(k[r]),
                })
                .collect()
        })
        .collect())
}

pub fn load_feature_rows<T: Scalar>(path: impl AsRef<Path>, schema: &Schema) -> Result<Vec<Vec<FeatureValue<T>>>> {
    read_feature_rows(File::open(path)?, schema)
}

/// Reads a dataset whose target column may be missing; a missing target is
/// filled with zeros and reported as `false`.
pub fn read_inputs<T: Scalar, R: Read>(reader: R, schema: &Schema) -> Result<(Dataset<T>, bool)> {
    let table = read_table::<T, R>(reader, schema, false)?;
    let n = table.columns.first().map_or(0, Column::len);
    let has_target = table.target.is_some();
    let target = table.target.unwrap_or_else(|| vec![T::zero(); n]);
    Ok((Dataset::new(table.schema, table.columns, target)?, has_target))
}

pub fn load_inputs<T: Scalar>(path: impl AsRef<Path>, schema: &Schema) -> Result<(Dataset<T>, bool)> {
    read_inputs(File::open(path)?, schema)
}

/// Writes features in schema order followed by the target. Numbers use the
/// shortest representation that parses back to the same bits.
pub fn write_csv<T: Scalar, W: Write>(ds: &Dataset<T>, writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
    let mut header: Vec<&str> = ds.schema().feature_names();
    header.push(ds.schema().target_name());
    w.write_record(&header)?;
    let mut record: Vec<String> = Vec::with_capacity(header.len());
    for r in 0..ds.n_rows() {
        record.clear();
        for (f, feature) in ds.schema().features().iter().enumerate() {
            record.push(match ds.value(r, f) {
                FeatureValue::Numeric(x) => x.to_string(),
                FeatureValue::Code(c) => feature.levels.get(c).cloned().unwrap_or_else(|| c.to_string()),
            });
        }
        record.push(ds.target()[r].to_string());
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_csv<T: Scalar>(ds: &Dataset<T>, path: impl AsRef<Path>) -> Result<()> {
    write_csv(ds, File::create(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Feature;

    fn xy_schema() -> Schema {
        Schema::new(vec![Feature::numeric("x")], "y").unwrap()
    }

    #[test]
    fn reads_three_rows() {
        let ds: Dataset<f64> = read_csv("x,y\n1,2\n3,4\n5,6\n".as_bytes(), &xy_schema()).unwrap();
        assert_eq!(ds.n_rows(), 3);
        assert_eq!(ds.target(), &[2.0, 4.0, 6.0]);
    }

    #[test]
    fn missing_target_is_schema_error() {
        let err = read_csv::<f64, _>("x\n1\n".as_bytes(), &xy_schema()).unwrap_err();
        assert!(matches!(err, EbmError::Schema(_)));
    }

    #[test]
    fn bad_numeric_reports_row_and_column() {
        let err = read_csv::<f64, _>("x,y\n1,2\nabc,4\n".as_bytes(), &xy_schema()).unwrap_err();
        match err {
            EbmError::Parse { row, column, .. } => {
                assert_eq!(row, 2);
                assert_eq!(column, "x");
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(read_csv::<f64, _>("x,y\n,2\n".as_bytes(), &xy_schema()).is_err());
        assert!(read_csv::<f64, _>("x,y\nnan,2\n".as_bytes(), &xy_schema()).is_err());
    }

    #[test]
    fn header_order_is_free() {
        let ds: Dataset<f64> = read_csv("y,id,x\n2,a,1\n".as_bytes(), &xy_schema()).unwrap();
        assert_eq!(ds.value(0, 0), FeatureValue::Numeric(1.0));
        assert_eq!(ds.target(), &[2.0]);
    }

    #[test]
    fn categories_by_first_appearance_and_byte_round_trip() {
        let schema = Schema::new(vec![Feature::numeric("x"), Feature::categorical("curv", 2)], "y").unwrap();
        let text = "x,curv,y\n0.5,single,1.25\n2,double,-3\n7,single,0.1\n";
        let ds: Dataset<f64> = read_csv(text.as_bytes(), &schema).unwrap();
        assert_eq!(ds.column(1), &Column::Categorical(vec![0, 1, 0]));
        assert_eq!(ds.schema().feature(1).levels, vec!["single", "double"]);
        let mut out = Vec::new();
        write_csv(&ds, &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), text);
    }

    #[test]
    fn unknown_category_is_domain_error() {
        let schema = Schema::new(
            vec![Feature::categorical("curv", 2).with_levels(["single", "double"])],
            "y",
        )
        .unwrap();
        let err = read_csv::<f64, _>("curv,y\ntriple,1\n".as_bytes(), &schema).unwrap_err();
        assert!(matches!(err, EbmError::Domain(_)));
        let open = Schema::new(vec![Feature::categorical("curv", 2)], "y").unwrap();
        let err = read_csv::<f64, _>("curv,y\na,1\nb,1\nc,1\n".as_bytes(), &open).unwrap_err();
        assert!(matches!(err, EbmError::Domain(_)));
    }

    #[test]
    fn feature_rows_allow_absent_target() {
        let rows: Vec<Vec<FeatureValue<f64>>> = read_feature_rows("x\n1\n2\n".as_bytes(), &xy_schema()).unwrap();
        assert_eq!(rows, vec![vec![FeatureValue::Numeric(1.0)], vec![FeatureValue::Numeric(2.0)]]);
    }
}
