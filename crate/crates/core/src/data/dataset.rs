use std::path::Path;

use crate::data::schema::{validate_cuts, Kind, Schema, VariableSpec};
use crate::error::{Error, Result};

/// One column of values. Categorical cells hold level indices into the
/// variable's `levels`.
#[derive(Debug, Clone, PartialEq)]
pub enum Column {
    Categorical(Vec<u32>),
    Continuous(Vec<f64>),
}

impl Column {
    pub fn len(&self) -> usize {
        match self {
            Column::Categorical(v) => v.len(),
            Column::Continuous(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Value as a real number; categorical cells map to their level index.
    pub fn value(&self, row: usize) -> f64 {
        match self {
            Column::Categorical(v) => v[row] as f64,
            Column::Continuous(v) => v[row],
        }
    }

    fn select(&self, rows: &[usize]) -> Column {
        match self {
            Column::Categorical(v) => Column::Categorical(rows.iter().map(|&r| v[r]).collect()),
            Column::Continuous(v) => Column::Continuous(rows.iter().map(|&r| v[r]).collect()),
        }
    }
}

/// Immutable column-major table validated against its schema.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: Schema,
    columns: Vec<Column>,
    n_rows: usize,
}

/// Result of [`load_csv`].
#[derive(Debug, Clone)]
pub struct CsvLoad {
    pub dataset: Dataset,
    /// Rows skipped because at least one cell was empty.
    pub dropped: usize,
}

impl Dataset {
    pub fn from_columns(schema: Schema, columns: Vec<Column>) -> Result<Self> {
        if columns.len() != schema.len() {
            return Err(Error::Schema(format!(
                "{} columns supplied for {} variables",
                columns.len(),
                schema.len()
            )));
        }
        let n_rows = columns.first().map_or(0, Column::len);
        for (spec, col) in schema.vars().iter().zip(&columns) {
            if col.len() != n_rows {
                return Err(Error::Schema(format!("column `{}` has a ragged length", spec.name)));
            }
            match (spec.kind, col) {
                (Kind::Categorical, Column::Categorical(v)) => {
                    if let Some(&bad) = v.iter().find(|&&x| x as usize >= spec.levels.len()) {
                        return Err(Error::Level {
                            row: v.iter().position(|&x| x == bad).unwrap_or(0),
                            column: spec.name.clone(),
                            value: bad.to_string(),
                        });
                    }
                }
                (Kind::Continuous, Column::Continuous(v)) => {
                    if v.iter().any(|x| !x.is_finite()) {
                        return Err(Error::Schema(format!("`{}` has non-finite values", spec.name)));
                    }
                }
                _ => {
                    return Err(Error::Schema(format!(
                        "column `{}` does not match its declared kind",
                        spec.name
                    )))
                }
            }
        }
        Ok(Dataset {
            schema,
            columns,
            n_rows,
        })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.schema
            .index_of(name)
            .ok_or_else(|| Error::Column(name.to_string()))
    }

    pub fn column(&self, name: &str) -> Result<&Column> {
        Ok(&self.columns[self.column_index(name)?])
    }

    /// Level indices of a categorical column.
    pub fn categorical(&self, name: &str) -> Result<&[u32]> {
        match self.column(name)? {
            Column::Categorical(v) => Ok(v),
            Column::Continuous(_) => Err(Error::Invalid(format!("`{name}` is not categorical"))),
        }
    }

    /// New dataset holding `rows` in the given order; indices may repeat.
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            columns: self.columns.iter().map(|c| c.select(rows)).collect(),
            n_rows: rows.len(),
        }
    }

    fn cell_text(&self, col: usize, row: usize) -> String {
        match &self.columns[col] {
            Column::Categorical(v) => self.schema.vars()[col].levels[v[row] as usize].clone(),
            Column::Continuous(v) => format!("{}", v[row]),
        }
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv_to(file)
    }

    pub fn write_csv_to<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.schema.vars().iter().map(|v| v.name.as_str()))?;
        let mut record = Vec::with_capacity(self.columns.len());
        for row in 0..self.n_rows {
            record.clear();
            for col in 0..self.columns.len() {
                record.push(self.cell_text(col, row));
            }
            w.write_record(&record)?;
        }
        w.flush().map_err(|e| Error::io("<csv output>", e))?;
        Ok(())
    }

    /// Bins a continuous variable into labelled categories.
    ///
    /// The bin of `v` is the smallest `j` with `v <= cuts[j]`, or the last
    /// label when `v` exceeds every cut.
    pub fn discretize(
        &self,
        var: &str,
        cuts: &[f64],
        labels: &[String],
        lower: Option<f64>,
    ) -> Result<Dataset> {
        let idx = self.column_index(var)?;
        let spec = &self.schema.vars()[idx];
        let values = match (&spec.kind, &self.columns[idx]) {
            (Kind::Continuous, Column::Continuous(v)) => v,
            _ => return Err(Error::Invalid(format!("`{var}` is not continuous"))),
        };
        validate_cuts(var, cuts, labels)?;
        let mut bins = Vec::with_capacity(values.len());
        for (row, &v) in values.iter().enumerate() {
            if let Some(lo) = lower {
                if v < lo {
                    return Err(Error::Invalid(format!(
                        "row {row}: `{var}` = {v} is below the lower bound {lo}"
                    )));
                }
            }
            bins.push(bin_index(v, cuts) as u32);
        }
        let mut schema = self.schema.clone();
        schema.replace(
            idx,
            VariableSpec {
                name: spec.name.clone(),
                kind: Kind::Categorical,
                role: spec.role,
                levels: labels.to_vec(),
                cuts: Vec::new(),
                labels: Vec::new(),
                lower: None,
            },
        );
        let mut columns = self.columns.clone();
        columns[idx] = Column::Categorical(bins);
        Ok(Dataset {
            schema,
            columns,
            n_rows: self.n_rows,
        })
    }

    /// Applies every cut specification declared in the schema.
    pub fn discretize_declared(&self) -> Result<Dataset> {
        self.discretize_where(|_| true)
    }

    /// Applies declared cuts only to variables accepted by `pick`.
    pub fn discretize_where(&self, pick: impl Fn(&VariableSpec) -> bool) -> Result<Dataset> {
        let mut out = self.clone();
        for spec in self.schema.vars() {
            if spec.kind == Kind::Continuous && !spec.cuts.is_empty() && pick(spec) {
                out = out.discretize(&spec.name, &spec.cuts, &spec.labels, spec.lower)?;
            }
        }
        Ok(out)
    }

    /// Keeps the named columns, in the order given.
    pub fn select_columns(&self, names: &[String]) -> Result<Dataset> {
        let mut vars = Vec::with_capacity(names.len());
        let mut columns = Vec::with_capacity(names.len());
        for name in names {
            let idx = self.column_index(name)?;
            vars.push(self.schema.vars()[idx].clone());
            columns.push(self.columns[idx].clone());
        }
        Ok(Dataset {
            schema: Schema::new(vars)?,
            columns,
            n_rows: self.n_rows,
        })
    }

    pub fn is_all_categorical(&self) -> bool {
        self.columns.iter().all(|c| matches!(c, Column::Categorical(_)))
    }
}

/// Left-open, right-closed binning.
pub fn bin_index(v: f64, cuts: &[f64]) -> usize {
    cuts.partition_point(|&c| c < v)
}

/// Reads a headed CSV file, matching columns to `schema` by name.
pub fn load_csv(path: impl AsRef<Path>, schema: &Schema) -> Result<CsvLoad> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    load_csv_from(file, schema)
}

pub fn load_csv_from<R: std::io::Read>(input: R, schema: &Schema) -> Result<CsvLoad> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = rdr.headers()?.clone();
    let mut positions = Vec::with_capacity(schema.len());
    for name in header.iter() {
        if schema.index_of(name.trim()).is_none() {
            return Err(Error::Column(name.to_string()));
        }
    }
    for spec in schema.vars() {
        let pos = header
            .iter()
            .position(|h| h.trim() == spec.name)
            .ok_or_else(|| Error::Column(spec.name.clone()))?;
        positions.push(pos);
    }

    let mut columns: Vec<Column> = schema
        .vars()
        .iter()
        .map(|v| match v.kind {
            Kind::Categorical => Column::Categorical(Vec::new()),
            Kind::Continuous => Column::Continuous(Vec::new()),
        })
        .collect();
    let mut dropped = 0;
    let mut record = csv::StringRecord::new();
    let mut line = 0;
    while rdr.read_record(&mut record)? {
        line += 1;
        let cells: Vec<&str> = positions.iter().map(|&p| record.get(p).unwrap_or("").trim()).collect();
        if cells.iter().any(|c| c.is_empty()) {
            dropped += 1;
            continue;
        }
        for ((spec, col), &cell) in schema.vars().iter().zip(columns.iter_mut()).zip(&cells) {
            match col {
                Column::Categorical(v) => {
                    let level = spec.level_index(cell).ok_or_else(|| Error::Level {
                        row: line,
                        column: spec.name.clone(),
                        value: cell.to_string(),
                    })?;
                    v.push(level as u32);
                }
                Column::Continuous(v) => {
                    let x: f64 = cell.parse().map_err(|_| Error::Parse {
                        row: line,
                        column: spec.name.clone(),
                        value: cell.to_string(),
                    })?;
                    if !x.is_finite() {
                        return Err(Error::Parse {
                            row: line,
                            column: spec.name.clone(),
                            value: cell.to_string(),
                        });
                    }
                    v.push(x);
                }
            }
        }
    }
    let dataset = Dataset::from_columns(schema.clone(), columns)?;
    Ok(CsvLoad { dataset, dropped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::schema::Role;

    fn schema() -> Schema {
        Schema::new(vec![
            VariableSpec::continuous("PMR", Role::Treatment).with_cuts(&[200.0, 280.0], &["Low", "Medium", "High"]),
            VariableSpec::categorical("Safety", Role::Outcome, &["0", "1"]),
            VariableSpec::continuous("ADT", Role::Covariate),
        ])
        .unwrap()
    }

    #[test]
    fn loads_three_rows() {
        let csv = "PMR,Safety,ADT\n150,0,1000\n250,1,2000.5\n300,0,3\n";
        let out = load_csv_from(csv.as_bytes(), &schema()).unwrap();
        assert_eq!(out.dataset.n_rows(), 3);
        assert_eq!(out.dropped, 0);
    }

    #[test]
    fn header_order_is_irrelevant() {
        let csv = "ADT,Safety,PMR\n1000,0,150\n";
        let out = load_csv_from(csv.as_bytes(), &schema()).unwrap();
        assert_eq!(out.dataset.column("ADT").unwrap().value(0), 1000.0);
    }

    #[test]
    fn drops_rows_with_missing_cells() {
        let csv = "PMR,Safety,ADT\n150,0,1000\n250,,2000\n300,0,3\n";
        let out = load_csv_from(csv.as_bytes(), &schema()).unwrap();
        assert_eq!(out.dataset.n_rows(), 2);
        assert_eq!(out.dropped, 1);
    }

    #[test]
    fn missing_treatment_column_is_an_error() {
        let csv = "Safety,ADT\n0,1000\n";
        let err = load_csv_from(csv.as_bytes(), &schema()).unwrap_err();
        assert!(matches!(err, Error::Column(ref c) if c == "PMR"), "{err}");
        assert!(err.to_string().contains("unknown/missing column"));
    }

    #[test]
    fn unknown_column_and_bad_cells() {
        let csv = "PMR,Safety,ADT,Extra\n150,0,1000,1\n";
        assert!(matches!(load_csv_from(csv.as_bytes(), &schema()), Err(Error::Column(_))));
        let csv = "PMR,Safety,ADT\n150,0,abc\n";
        assert!(matches!(load_csv_from(csv.as_bytes(), &schema()), Err(Error::Parse { .. })));
        let csv = "PMR,Safety,ADT\n150,2,1\n";
        assert!(matches!(load_csv_from(csv.as_bytes(), &schema()), Err(Error::Level { .. })));
    }

    #[test]
    fn unreadable_file() {
        assert!(matches!(
            load_csv("/nonexistent/definitely/not/here.csv", &schema()),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn discretize_follows_right_closed_bins() {
        let csv = "PMR,Safety,ADT\n150,0,1\n250,0,1\n280,0,1\n300,1,1\n";
        let ds = load_csv_from(csv.as_bytes(), &schema()).unwrap().dataset;
        let labels: Vec<String> = ["Low", "Medium", "High"].iter().map(|s| s.to_string()).collect();
        let out = ds.discretize("PMR", &[200.0, 280.0], &labels, Some(139.0)).unwrap();
        let col = out.categorical("PMR").unwrap();
        let got: Vec<&str> = col.iter().map(|&i| labels[i as usize].as_str()).collect();
        assert_eq!(got, vec!["Low", "Medium", "Medium", "High"]);
        // the produced variable is categorical and cannot be binned again
        assert!(out.discretize("PMR", &[200.0, 280.0], &labels, None).is_err());
    }

    #[test]
    fn discretize_rejects_values_below_lower_bound() {
        let csv = "PMR,Safety,ADT\n100,0,1\n";
        let ds = load_csv_from(csv.as_bytes(), &schema()).unwrap().dataset;
        let labels: Vec<String> = ["Low", "Medium", "High"].iter().map(|s| s.to_string()).collect();
        assert!(ds.discretize("PMR", &[200.0, 280.0], &labels, Some(139.0)).is_err());
        assert!(ds.discretize("PMR", &[200.0, 280.0], &labels, None).is_ok());
    }

    #[test]
    fn declared_age_bins() {
        // three age bins with cuts at 9.5 and 20.5
        let schema = Schema::new(vec![
            VariableSpec::categorical("T", Role::Treatment, &["a", "b"]),
            VariableSpec::categorical("S", Role::Outcome, &["0", "1"]),
            VariableSpec::continuous("Age", Role::Covariate).with_cuts(&[9.5, 20.5], &["0", "1", "2"]),
        ])
        .unwrap();
        let csv = "T,S,Age\na,0,1\na,0,9\nb,1,10\nb,0,20\na,1,21\n";
        let ds = load_csv_from(csv.as_bytes(), &schema).unwrap().dataset;
        let out = ds.discretize_declared().unwrap();
        assert_eq!(out.categorical("Age").unwrap(), &[0, 0, 1, 1, 2]);
    }
}
