//! CSV datasets: `id`, the covariate columns, then `R_<item>` in
//! {NA, 0, 1} and `Y_<item>` in {NA, 1..L} for every item. Lines starting
//! with `#` are ignored.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use lcirt::model::{Dataset, Indicator};

use crate::design::Design;
use crate::error::{CliError, CliResult, Location};

pub const NA: &str = "NA";

/// A dataset together with the subject identifiers.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub ids: Vec<String>,
    pub data: Dataset,
}

enum Column {
    Id,
    Covariate(usize),
    R(usize),
    Y(usize),
}

fn cell_error(path: &Path, line: u64, row: usize, field: &str, message: String) -> CliError {
    CliError::at(
        "data",
        format!("{message} (row {row}, column `{field}`)"),
        Location { file: path.display().to_string(), line: Some(line as usize), row: Some(row), field: Some(field.to_string()), ..Location::default() },
    )
}

pub fn read_dataset(path: &Path, design: &Design) -> CliResult<Table> {
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    read_from(file, path, design)
}

/// Reads a dataset from `reader`; `path` labels error locations.
pub fn read_from<R: Read>(reader: R, path: &Path, design: &Design) -> CliResult<Table> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(reader);
    let csv_err = |e: csv::Error| {
        let mut loc = Location::file(path);
        loc.line = e.position().map(|p| p.line() as usize);
        CliError::at("data", format!("malformed CSV: {e}"), loc)
    };
    let header = rdr.headers().map_err(csv_err)?.clone();
    let items = &design.items;
    let m = items.n_items();
    let mut wanted: HashMap<String, Column> = HashMap::new();
    wanted.insert("id".into(), Column::Id);
    for (k, c) in design.covariates.iter().enumerate() {
        wanted.insert(c.name.clone(), Column::Covariate(k));
    }
    for (j, name) in items.names.iter().enumerate() {
        wanted.insert(format!("R_{name}"), Column::R(j));
        wanted.insert(format!("Y_{name}"), Column::Y(j));
    }
    let header_err = |msg: String| {
        let mut loc = Location::file(path);
        loc.line = Some(1);
        CliError::at("data", msg, loc)
    };
    let mut columns = Vec::with_capacity(header.len());
    for field in header.iter() {
        let col = wanted.remove(field).ok_or_else(|| header_err(format!("unexpected or repeated column `{field}`")))?;
        columns.push(col);
    }
    if let Some(missing) = wanted.keys().min() {
        return Err(header_err(format!("missing column `{missing}`")));
    }

    let widths: Vec<usize> = design.covariates.iter().map(|c| c.width()).collect();
    let offsets: Vec<usize> = widths.iter().scan(0, |acc, w| {
        let o = *acc;
        *acc += w;
        Some(o)
    }).collect();
    let n_cov = design.n_cov();
    let mut ids = Vec::new();
    let mut r_all = Vec::new();
    let mut y_all = Vec::new();
    let mut x_all = Vec::new();
    let mut empty_rows = Vec::new();
    let mut known_ids = std::collections::HashSet::new();
    for (row0, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let row = row0 + 1;
        let line = rec.position().map_or(0, |p| p.line());
        let mut id = String::new();
        let mut x = vec![0.0; n_cov];
        let mut r_cells: Vec<Option<u8>> = vec![None; m];
        let mut y_cells: Vec<Option<u16>> = vec![None; m];
        for (k, cell) in rec.iter().enumerate() {
            let field = &header[k];
            let bad = |msg: String| cell_error(path, line, row, field, msg);
            match columns[k] {
                Column::Id => id = cell.to_string(),
                Column::Covariate(c) => {
                    let cov = &design.covariates[c];
                    let vals = cov.encode(cell).map_err(bad)?;
                    x[offsets[c]..offsets[c] + widths[c]].copy_from_slice(&vals);
                }
                Column::R(j) => {
                    r_cells[j] = match cell {
                        NA => None,
                        "0" => Some(0),
                        "1" => Some(1),
                        _ => return Err(bad(format!("`{cell}` is not NA, 0 or 1"))),
                    }
                }
                Column::Y(j) => {
                    if cell != NA {
                        let l = items.categories[j];
                        match cell.parse::<u16>() {
                            Ok(y) if y >= 1 && usize::from(y) <= l => y_cells[j] = Some(y),
                            _ => return Err(bad(format!("`{cell}` is not NA or a category in 1..={l}"))),
                        }
                    }
                }
            }
        }
        if id.is_empty() {
            return Err(cell_error(path, line, row, "id", "empty subject id".into()));
        }
        if !known_ids.insert(id.clone()) {
            return Err(cell_error(path, line, row, "id", format!("duplicate subject id `{id}`")));
        }
        let mut any_due = false;
        for j in 0..m {
            let field_r = format!("R_{}", items.names[j]);
            let field_y = format!("Y_{}", items.names[j]);
            let (ind, y) = match (r_cells[j], y_cells[j]) {
                (None, None) => (Indicator::StructuralMissing, None),
                (Some(0), None) => (Indicator::Skipped, None),
                (Some(1), Some(y)) => (Indicator::Answered, Some(y)),
                (None, Some(_)) => return Err(cell_error(path, line, row, &field_y, "response given for an item that is not due (R is NA)".into())),
                (Some(0), Some(_)) => return Err(cell_error(path, line, row, &field_y, "response given for an unanswered item (R = 0)".into())),
                _ => return Err(cell_error(path, line, row, &field_r, "answered item (R = 1) without a response".into())),
            };
            any_due |= ind != Indicator::StructuralMissing;
            r_all.push(ind);
            y_all.push(y);
        }
        if !any_due {
            empty_rows.push(row);
        }
        ids.push(id);
        x_all.extend(x);
    }
    if !empty_rows.is_empty() {
        let mut loc = Location::file(path);
        loc.row = empty_rows.first().copied();
        return Err(CliError::at("data", format!("subjects with every item structurally missing at rows {empty_rows:?}"), loc));
    }
    if ids.is_empty() {
        return Err(CliError::at("data", "the dataset has no rows", Location::file(path)));
    }
    let data = Dataset { n: ids.len(), m, n_cov, r: r_all, y: y_all, x: x_all };
    Ok(Table { ids, data })
}

pub fn write_dataset(path: &Path, design: &Design, table: &Table) -> CliResult<()> {
    let file = std::fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    write_to(std::io::BufWriter::new(file), design, table).map_err(|e| CliError::io(path, e))
}

pub fn write_to<W: Write>(writer: W, design: &Design, table: &Table) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["id".to_string()];
    header.extend(design.covariates.iter().map(|c| c.name.clone()));
    for name in &design.items.names {
        header.push(format!("R_{name}"));
        header.push(format!("Y_{name}"));
    }
    w.write_record(&header)?;
    let data = &table.data;
    for i in 0..data.n {
        let mut rec = Vec::with_capacity(header.len());
        rec.push(table.ids[i].clone());
        let x = data.x_row(i);
        let mut off = 0;
        for c in &design.covariates {
            rec.push(c.decode(&x[off..off + c.width()]));
            off += c.width();
        }
        for j in 0..data.m {
            let (r, y) = match data.r(i, j) {
                Indicator::StructuralMissing => (NA.to_string(), NA.to_string()),
                Indicator::Skipped => ("0".to_string(), NA.to_string()),
                Indicator::Answered => ("1".to_string(), data.y(i, j).map_or(NA.to_string(), |y| y.to_string())),
            };
            rec.push(r);
            rec.push(y);
        }
        w.write_record(&rec)?;
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn design() -> Design {
        let text = r#"
schema_version = 1
[latent]
k_u = 2
k_v = 1
[[covariates]]
name = "sex"
kind = "categorical"
levels = ["F", "M"]
[[covariates]]
name = "score"
kind = "numeric"
[[items]]
name = "a"
categories = 3
[[items]]
name = "b"
categories = 4
"#;
        Design::parse(text, Path::new("d.toml")).unwrap()
    }

    fn read(text: &str) -> CliResult<Table> {
        read_from(text.as_bytes(), Path::new("data.csv"), &design())
    }

    #[test]
    fn legal_patterns_accepted() {
        let t = read("id,sex,score,R_a,Y_a,R_b,Y_b\ns1,M,0.5,NA,NA,1,3\ns2,F,-1,0,NA,1,1\n").unwrap();
        let d = &t.data;
        assert_eq!(d.r(0, 0), Indicator::StructuralMissing);
        assert_eq!(d.r(0, 1), Indicator::Answered);
        assert_eq!(d.y(0, 1), Some(3));
        assert_eq!(d.r(1, 0), Indicator::Skipped);
        assert_eq!(d.x_row(0), &[1.0, 0.5]);
        assert_eq!(t.ids, vec!["s1", "s2"]);
    }

    fn expect_cell(text: &str, row: usize, field: &str) {
        match read(text) {
            Err(CliError::User { location: Some(loc), .. }) => {
                assert_eq!(loc.row, Some(row));
                assert_eq!(loc.field.as_deref(), Some(field));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn illegal_patterns_name_the_cell() {
        let h = "id,sex,score,R_a,Y_a,R_b,Y_b\n";
        expect_cell(&format!("{h}s1,M,0,1,1,0,2\n"), 1, "Y_b");
        expect_cell(&format!("{h}s1,M,0,1,1,1,1\ns2,M,0,1,NA,1,1\n"), 2, "R_a");
        expect_cell(&format!("{h}s1,M,0,NA,2,1,1\n"), 1, "Y_a");
        expect_cell(&format!("{h}s1,M,0,1,4,1,1\n"), 1, "Y_a");
        expect_cell(&format!("{h}s1,X,0,1,1,1,1\n"), 1, "sex");
        expect_cell(&format!("{h}s1,M,abc,1,1,1,1\n"), 1, "score");
        expect_cell(&format!("{h}s1,M,0,2,1,1,1\n"), 1, "R_a");
    }

    #[test]
    fn all_structural_rows_are_listed() {
        let h = "id,sex,score,R_a,Y_a,R_b,Y_b\n";
        let err = read(&format!("{h}s1,M,0,NA,NA,NA,NA\ns2,M,0,1,1,1,1\ns3,F,0,NA,NA,NA,NA\n")).unwrap_err();
        assert!(err.to_string().contains("[1, 3]"), "{err}");
    }

    #[test]
    fn header_problems() {
        assert!(read("id,sex,R_a,Y_a,R_b,Y_b\ns1,M,1,1,1,1\n").is_err());
        assert!(read("id,sex,score,R_a,Y_a,R_b,Y_b,extra\ns1,M,0,1,1,1,1,x\n").is_err());
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let text = "id,sex,score,R_a,Y_a,R_b,Y_b\ns1,M,0.5,NA,NA,1,3\ns2,F,-1.25,0,NA,1,1\n";
        let t = read(text).unwrap();
        let mut out = Vec::new();
        write_to(&mut out, &design(), &t).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), text);
    }
}
