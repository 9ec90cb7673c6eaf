use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use csv::{ReaderBuilder, Terminator, WriterBuilder};

use super::{ChronoDataset, Feature, FeatureKind, FeatureSchema};
use crate::error::{Error, Result};

/// Separator between tokens of a multi-valued categorical cell.
pub const MVC_SEPARATOR: char = '|';

const LABEL_TOKEN: &str = "label";

enum ColumnRole {
    Feature(FeatureKind),
    Label,
}

fn read_schema_file(path: &Path) -> Result<Vec<(String, ColumnRole)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let load_err = |message: String| Error::Load {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let (name, kind) = line
            .rsplit_once(',')
            .ok_or_else(|| load_err(format!("expected `name,kind`, got `{line}`")))?;
        let role = match kind.trim() {
            LABEL_TOKEN => ColumnRole::Label,
            token => ColumnRole::Feature(
                token
                    .parse()
                    .map_err(|_| load_err(format!("unknown kind token `{token}` for column `{name}`")))?,
            ),
        };
        out.push((name.to_string(), role));
    }
    Ok(out)
}

/// Load a data file and its schema file.
///
/// Feature order follows the data file header. Every data column must be
/// declared in the schema file, and every schema entry must appear in the
/// header. Exactly one column must carry the `label` kind.
pub fn load_dataset(data_path: impl AsRef<Path>, schema_path: impl AsRef<Path>) -> Result<ChronoDataset> {
    let data_path = data_path.as_ref();
    let (schema, rows, labels) = load_table(data_path, schema_path.as_ref(), true)?;
    let labels = labels.expect("labeled load always yields labels");
    ChronoDataset::new(schema, rows, labels, data_path.display().to_string())
}

/// Load a data file that lacks the label column, such as the test file of
/// one protocol step. The schema file still declares the label.
pub fn load_unlabeled(
    data_path: impl AsRef<Path>,
    schema_path: impl AsRef<Path>,
) -> Result<(FeatureSchema, Vec<Vec<String>>)> {
    let (schema, rows, _) = load_table(data_path.as_ref(), schema_path.as_ref(), false)?;
    Ok((schema, rows))
}

type Table = (FeatureSchema, Vec<Vec<String>>, Option<Vec<u8>>);

fn load_table(data_path: &Path, schema_path: &Path, labeled: bool) -> Result<Table> {
    let declared = read_schema_file(schema_path)?;

    let mut kinds: HashMap<&str, &ColumnRole> = HashMap::new();
    let mut label_name = None;
    for (name, role) in &declared {
        if kinds.insert(name.as_str(), role).is_some() {
            return Err(Error::Schema(format!("column `{name}` declared twice in {}", schema_path.display())));
        }
        if let ColumnRole::Label = role {
            if label_name.replace(name.as_str()).is_some() {
                return Err(Error::Schema("more than one label column declared".into()));
            }
        }
    }
    let label_name = label_name.ok_or_else(|| Error::Schema("no label column declared".into()))?;

    let file = File::open(data_path).map_err(|e| Error::io(data_path, e))?;
    let mut reader = ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(BufReader::new(file));
    let load_err = |line: usize, message: String| Error::Load {
        path: data_path.to_path_buf(),
        line,
        message,
    };

    let header = reader
        .headers()
        .map_err(|e| load_err(1, e.to_string()))?
        .clone();
    let mut features = Vec::new();
    let mut feature_cols = Vec::new();
    let mut label_col = None;
    for (col, name) in header.iter().enumerate() {
        match kinds.get(name) {
            None => return Err(load_err(1, format!("column `{name}` is not declared in the schema file"))),
            Some(ColumnRole::Label) => label_col = Some(col),
            Some(ColumnRole::Feature(kind)) => {
                features.push(Feature {
                    name: name.to_string(),
                    kind: *kind,
                });
                feature_cols.push(col);
            }
        }
    }
    for (name, role) in &declared {
        if !labeled && matches!(role, ColumnRole::Label) {
            continue;
        }
        if !header.iter().any(|h| h == name) {
            return Err(load_err(1, format!("missing column `{name}` declared in the schema file")));
        }
    }
    if !labeled && label_col.is_some() {
        return Err(load_err(1, format!("unexpected label column `{label_name}` in an unlabeled file")));
    }
    let schema = FeatureSchema::new(features, label_name)?;

    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            load_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != header.len() {
            return Err(load_err(
                line,
                format!("ragged row {}: {} cells, header has {}", rows.len(), record.len(), header.len()),
            ));
        }
        if let Some(label_col) = label_col {
            let label = match record[label_col].trim() {
                "0" => 0,
                "1" => 1,
                other => {
                    return Err(load_err(
                        line,
                        format!("row {}: label column `{label_name}` has non-binary value `{other}`", rows.len()),
                    ))
                }
            };
            labels.push(label);
        }
        rows.push(feature_cols.iter().map(|&c| record[c].to_string()).collect());
    }
    Ok((schema, rows, labeled.then_some(labels)))
}

/// Write a schema file, label column last.
pub fn write_schema_file(path: impl AsRef<Path>, schema: &FeatureSchema) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for f in schema.features() {
        writeln!(out, "{},{}", f.name, f.kind.token()).map_err(|e| Error::io(path, e))?;
    }
    writeln!(out, "{},{LABEL_TOKEN}", schema.label()).map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}

/// Write rows in the data-file format. The label column is appended last
/// when `labels` is given and omitted otherwise.
pub fn write_rows(
    path: impl AsRef<Path>,
    schema: &FeatureSchema,
    rows: &[Vec<String>],
    labels: Option<&[u8]>,
) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = WriterBuilder::new()
        .terminator(Terminator::Any(b'\n'))
        .from_writer(BufWriter::new(file));
    let csv_err = |e: csv::Error| Error::io(path, std::io::Error::other(e));

    let mut header: Vec<&str> = schema.features().iter().map(|f| f.name.as_str()).collect();
    if labels.is_some() {
        header.push(schema.label());
    }
    writer.write_record(&header).map_err(csv_err)?;
    for (i, row) in rows.iter().enumerate() {
        match labels {
            Some(labels) => {
                let label = if labels[i] == 1 { "1" } else { "0" };
                writer
                    .write_record(row.iter().map(String::as_str).chain(std::iter::once(label)))
                    .map_err(csv_err)?;
            }
            None => writer.write_record(row).map_err(csv_err)?,
        }
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

/// Write a dataset as a data file plus a schema file.
pub fn write_dataset(
    dataset: &ChronoDataset,
    data_path: impl AsRef<Path>,
    schema_path: impl AsRef<Path>,
) -> Result<()> {
    write_rows(data_path, dataset.schema(), dataset.rows(), Some(dataset.labels()))?;
    write_schema_file(schema_path, dataset.schema())
}
