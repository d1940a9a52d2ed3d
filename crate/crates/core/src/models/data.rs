//! Single-column CSV observations: reals for the mixture, `true`/`false`
//! for the survey. A non-parsing first row is treated as a header.

use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};

fn read_column<T, R: Read>(reader: R, parse: impl Fn(&str) -> Option<T>) -> Result<Vec<T>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != 1 {
            return Err(Error::Data(format!(
                "row {}: expected one column, found {}",
                i + 1,
                rec.len()
            )));
        }
        let field = rec[0].trim_start_matches('\u{feff}');
        if field.is_empty() {
            continue;
        }
        match parse(field) {
            Some(v) => out.push(v),
            None if i == 0 => {}
            None => {
                return Err(Error::Data(format!(
                    "row {}: cannot parse {field:?}",
                    i + 1
                )))
            }
        }
    }
    if out.is_empty() {
        return Err(Error::Data("no observations".into()));
    }
    Ok(out)
}

fn parse_bool(s: &str) -> Option<bool> {
    if s.eq_ignore_ascii_case("true") {
        Some(true)
    } else if s.eq_ignore_ascii_case("false") {
        Some(false)
    } else {
        None
    }
}

fn parse_real(s: &str) -> Option<f64> {
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

pub fn read_bools<R: Read>(reader: R) -> Result<Vec<bool>> {
    read_column(reader, parse_bool)
}

pub fn read_reals<R: Read>(reader: R) -> Result<Vec<f64>> {
    read_column(reader, parse_real)
}

pub fn load_bools(path: &Path) -> Result<Vec<bool>> {
    read_bools(std::fs::File::open(path)?)
}

pub fn load_reals(path: &Path) -> Result<Vec<f64>> {
    read_reals(std::fs::File::open(path)?)
}
