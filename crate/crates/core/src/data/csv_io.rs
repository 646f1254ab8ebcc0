use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::{
    classify_heavy_alcohol, AgeBand, Background, CivilStatus, CohortRow, CohortTable, DataError,
    Education, GroupLabel, HospitalizationCounts, Level, Provenance, Questionnaire, Region, Sex,
    Truth,
};

pub const COHORT_HEADER: [&str; 16] = [
    "id",
    "sex",
    "age",
    "region",
    "group",
    "daily_smoker",
    "alcohol_portions",
    "education",
    "civil_status",
    "hypertension",
    "high_chol",
    "bp_recent",
    "chol_recent",
    "hosp_full",
    "hosp_5y",
    "hosp_1y",
];

pub const TRUTH_HEADER: [&str; 10] = [
    "id",
    "daily_smoker",
    "alcohol_portions",
    "heavy_alcohol",
    "education",
    "civil_status",
    "hypertension",
    "high_chol",
    "bp_recent",
    "chol_recent",
];

fn fmt_bool(v: Option<bool>) -> String {
    match v {
        Some(true) => "1".to_string(),
        Some(false) => "0".to_string(),
        None => String::new(),
    }
}

fn fmt_level<L: Level>(v: Option<L>) -> String {
    v.map(|l| l.name().to_string()).unwrap_or_default()
}

fn fmt_float(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

fn cohort_record(row: &CohortRow) -> Vec<String> {
    let q = &row.questionnaire;
    vec![
        row.id.to_string(),
        row.background.sex.name().to_string(),
        row.background.age.to_string(),
        row.background.region.name().to_string(),
        row.group.name().to_string(),
        fmt_bool(q.daily_smoker),
        fmt_float(q.alcohol_portions),
        fmt_level(q.education),
        fmt_level(q.civil_status),
        fmt_bool(q.hypertension),
        fmt_bool(q.high_chol),
        fmt_bool(q.bp_recent),
        fmt_bool(q.chol_recent),
        row.hosp.full_history.to_string(),
        row.hosp.five_year.to_string(),
        row.hosp.one_year.to_string(),
    ]
}

/// Writes the cohort in the fixed 16-column schema. Output is byte-stable for
/// a given table.
pub fn write_cohort<W: Write>(table: &CohortTable, out: W) -> Result<(), DataError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(COHORT_HEADER)?;
    for row in table.rows() {
        w.write_record(cohort_record(row))?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Cohort schema plus a trailing `heavy_alcohol` column, so imputed heavy-use
/// flags survive when `alcohol_portions` is absent.
pub fn write_completed<W: Write>(table: &CohortTable, out: W) -> Result<(), DataError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    let mut header: Vec<&str> = COHORT_HEADER.to_vec();
    header.push("heavy_alcohol");
    w.write_record(&header)?;
    for row in table.rows() {
        let mut rec = cohort_record(row);
        rec.push(fmt_bool(row.questionnaire.heavy_alcohol));
        w.write_record(rec)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_truth<W: Write>(table: &CohortTable, out: W) -> Result<(), DataError> {
    let truth = table
        .truth()
        .ok_or_else(|| DataError::Domain("cohort carries no truth".to_string()))?;
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(TRUTH_HEADER)?;
    for (row, t) in table.rows().iter().zip(&truth.rows) {
        w.write_record([
            row.id.to_string(),
            fmt_bool(t.daily_smoker),
            fmt_float(t.alcohol_portions),
            fmt_bool(t.heavy_alcohol),
            fmt_level(t.education),
            fmt_level(t.civil_status),
            fmt_bool(t.hypertension),
            fmt_bool(t.high_chol),
            fmt_bool(t.bp_recent),
            fmt_bool(t.chol_recent),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

struct Fields<'a> {
    record: &'a csv::StringRecord,
    header: &'a [&'static str],
    line: usize,
}

impl Fields<'_> {
    fn err(&self, col: usize, message: impl Into<String>) -> DataError {
        DataError::Load {
            line: self.line,
            column: self.header[col].to_string(),
            message: message.into(),
        }
    }

    fn raw(&self, col: usize) -> &str {
        self.record.get(col).unwrap_or("")
    }

    fn required(&self, col: usize) -> Result<&str, DataError> {
        let v = self.raw(col);
        if v.is_empty() {
            Err(self.err(col, "required value is missing"))
        } else {
            Ok(v)
        }
    }

    fn uint<T: std::str::FromStr>(&self, col: usize) -> Result<T, DataError> {
        let v = self.required(col)?;
        v.parse()
            .map_err(|_| self.err(col, format!("`{v}` is not a nonnegative integer")))
    }

    fn level<L: Level>(&self, col: usize) -> Result<L, DataError> {
        let v = self.required(col)?;
        L::parse(v).ok_or_else(|| self.err(col, format!("unknown level `{v}`")))
    }

    fn opt_level<L: Level>(&self, col: usize) -> Result<Option<L>, DataError> {
        if self.raw(col).is_empty() {
            Ok(None)
        } else {
            self.level(col).map(Some)
        }
    }

    fn opt_bool(&self, col: usize) -> Result<Option<bool>, DataError> {
        match self.raw(col) {
            "" => Ok(None),
            "0" => Ok(Some(false)),
            "1" => Ok(Some(true)),
            v => Err(self.err(col, format!("`{v}` is not 0 or 1"))),
        }
    }

    fn opt_portions(&self, col: usize) -> Result<Option<f64>, DataError> {
        let v = self.raw(col);
        if v.is_empty() {
            return Ok(None);
        }
        let x: f64 = v
            .parse()
            .map_err(|_| self.err(col, format!("`{v}` is not a number")))?;
        if !x.is_finite() || x < 0.0 {
            return Err(self.err(col, format!("`{v}` must be a nonnegative number")));
        }
        Ok(Some(x))
    }
}

fn check_header(
    reader: &mut csv::Reader<impl Read>,
    expected: &[&'static str],
) -> Result<(), DataError> {
    let header = reader.headers()?.clone();
    for (i, want) in expected.iter().enumerate() {
        match header.get(i) {
            Some(got) if got == *want => {}
            Some(got) => {
                return Err(DataError::Load {
                    line: 1,
                    column: (*want).to_string(),
                    message: format!("schema mismatch: expected `{want}`, found `{got}`"),
                })
            }
            None => {
                return Err(DataError::Load {
                    line: 1,
                    column: (*want).to_string(),
                    message: "schema mismatch: column absent".to_string(),
                })
            }
        }
    }
    if header.len() != expected.len() {
        return Err(DataError::Load {
            line: 1,
            column: header.get(expected.len()).unwrap_or("").to_string(),
            message: format!(
                "schema mismatch: expected {} columns, found {}",
                expected.len(),
                header.len()
            ),
        });
    }
    Ok(())
}

fn csv_reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(input)
}

fn parse_cohort_row(f: &Fields<'_>) -> Result<CohortRow, DataError> {
    if f.record.len() != COHORT_HEADER.len() {
        return Err(DataError::Load {
            line: f.line,
            column: String::new(),
            message: format!(
                "expected {} fields, found {}",
                COHORT_HEADER.len(),
                f.record.len()
            ),
        });
    }
    let id: u64 = f.uint(0)?;
    let sex: Sex = f.level(1)?;
    let age: u8 = f.uint(2)?;
    if AgeBand::from_age(age).is_none() {
        return Err(f.err(2, format!("age {age} outside [25, 74]")));
    }
    let region: Region = f.level(3)?;
    let group: GroupLabel = f.level(4)?;
    let daily_smoker = f.opt_bool(5)?;
    let alcohol_portions = f.opt_portions(6)?;
    let education: Option<Education> = f.opt_level(7)?;
    let civil_status: Option<CivilStatus> = f.opt_level(8)?;
    let hypertension = f.opt_bool(9)?;
    let high_chol = f.opt_bool(10)?;
    let bp_recent = f.opt_bool(11)?;
    let chol_recent = f.opt_bool(12)?;
    let hosp = HospitalizationCounts {
        full_history: f.uint(13)?,
        five_year: f.uint(14)?,
        one_year: f.uint(15)?,
    };
    if !hosp.is_nested() {
        return Err(f.err(15, "horizons must satisfy hosp_1y <= hosp_5y <= hosp_full"));
    }
    let heavy_alcohol = alcohol_portions
        .map(|p| classify_heavy_alcohol(sex, p))
        .transpose()
        .map_err(|e| f.err(6, e.to_string()))?;
    let questionnaire = Questionnaire {
        daily_smoker,
        alcohol_portions,
        heavy_alcohol,
        education,
        civil_status,
        hypertension,
        high_chol,
        bp_recent,
        chol_recent,
    };
    if group == GroupLabel::NonParticipant {
        if let Some(field) = questionnaire.first_present() {
            let col = COHORT_HEADER.iter().position(|c| *c == field).unwrap_or(0);
            return Err(f.err(col, "non-participant rows must have no questionnaire values"));
        }
    }
    Ok(CohortRow {
        id,
        background: Background { sex, age, region },
        group,
        questionnaire,
        hosp,
    })
}

/// Reads and validates a cohort CSV. `source` is recorded as provenance.
pub fn read_cohort<R: Read>(input: R, source: &Path) -> Result<CohortTable, DataError> {
    let mut reader = csv_reader(input);
    check_header(&mut reader, &COHORT_HEADER)?;
    let mut rows = Vec::new();
    let mut first_line = HashMap::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let line = i + 2;
        let fields = Fields {
            record: &record,
            header: &COHORT_HEADER,
            line,
        };
        let row = parse_cohort_row(&fields)?;
        if let Some(prev) = first_line.insert(row.id, line) {
            return Err(fields.err(0, format!("duplicate id {} (first seen on line {prev})", row.id)));
        }
        rows.push(row);
    }
    CohortTable::new(
        rows,
        Provenance::Ingested {
            path: source.to_path_buf(),
        },
    )
}

pub fn load_cohort(path: impl AsRef<Path>) -> Result<CohortTable, DataError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_cohort(std::io::BufReader::new(file), path)
}

/// Reads a truth CSV and aligns it to `cohort` by id.
pub fn read_truth<R: Read>(input: R, cohort: &CohortTable) -> Result<Truth, DataError> {
    let mut reader = csv_reader(input);
    check_header(&mut reader, &TRUTH_HEADER)?;
    let mut by_id = HashMap::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let f = Fields {
            record: &record,
            header: &TRUTH_HEADER,
            line: i + 2,
        };
        let id: u64 = f.uint(0)?;
        let q = Questionnaire {
            daily_smoker: f.opt_bool(1)?,
            alcohol_portions: f.opt_portions(2)?,
            heavy_alcohol: f.opt_bool(3)?,
            education: f.opt_level(4)?,
            civil_status: f.opt_level(5)?,
            hypertension: f.opt_bool(6)?,
            high_chol: f.opt_bool(7)?,
            bp_recent: f.opt_bool(8)?,
            chol_recent: f.opt_bool(9)?,
        };
        by_id.insert(id, q);
    }
    let rows = cohort
        .rows()
        .iter()
        .map(|r| {
            by_id.remove(&r.id).ok_or(DataError::InvalidRecord {
                id: r.id,
                message: "no truth row for id".to_string(),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Truth { rows })
}

/// Loads a cohort together with its parallel truth file.
pub fn load_truth(
    cohort_path: impl AsRef<Path>,
    truth_path: impl AsRef<Path>,
) -> Result<CohortTable, DataError> {
    let cohort = load_cohort(cohort_path)?;
    let path = truth_path.as_ref();
    let file = File::open(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let truth = read_truth(std::io::BufReader::new(file), &cohort)?;
    cohort.with_truth(truth)
}
