//! Long-format CSV ingestion and export of observation tensors.
//!
//! The header is `site_id,lon,lat,year,<index_1>,...,<index_P>` with one row
//! per site-year. Sites keep their order of first appearance and years are
//! sorted ascending.

use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use mstp_core::covariance::Coord;
use mstp_core::model::ObservationTensor;

use crate::error::{CliError, Result};

const KEY_COLUMNS: [&str; 4] = ["site_id", "lon", "lat", "year"];
const MAX_LISTED: usize = 20;

pub fn load_dataset(path: &Path) -> Result<ObservationTensor> {
    let file = File::open(path).map_err(CliError::io(path))?;
    read_dataset(file).map_err(|e| match e {
        CliError::Data(msg) => CliError::Data(format!("{}: {msg}", path.display())),
        other => other,
    })
}

fn data_err(msg: impl Into<String>) -> CliError {
    CliError::Data(msg.into())
}

fn parse_number(field: &str, line: u64, column: &str) -> Result<f64> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| data_err(format!("line {line}: column `{column}` is not a number: {field:?}")))?;
    if !v.is_finite() {
        return Err(data_err(format!("line {line}: column `{column}` is not finite: {field:?}")));
    }
    Ok(v)
}

pub fn read_dataset<R: Read>(reader: R) -> Result<ObservationTensor> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers().map_err(|e| data_err(format!("cannot read header: {e}")))?.clone();
    if header.len() < 5 || header.iter().take(4).ne(KEY_COLUMNS.iter().copied()) {
        return Err(data_err(format!(
            "header must start with {} followed by at least one index column",
            KEY_COLUMNS.join(",")
        )));
    }
    let index_names: Vec<String> = header.iter().skip(4).map(str::to_string).collect();
    let p = index_names.len();

    let mut site_ids: Vec<String> = Vec::new();
    let mut sites: Vec<Coord> = Vec::new();
    let mut site_pos: HashMap<String, usize> = HashMap::new();
    // (site, year bits) -> (line, values with None for blanks)
    let mut rows: HashMap<(usize, u64), (u64, Vec<Option<f64>>)> = HashMap::new();
    let mut years: Vec<f64> = Vec::new();

    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            data_err(format!("line {line}: {e}"))
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let id = record[0].to_string();
        if id.is_empty() {
            return Err(data_err(format!("line {line}: empty site_id")));
        }
        let coord = [parse_number(&record[1], line, "lon")?, parse_number(&record[2], line, "lat")?];
        let year = parse_number(&record[3], line, "year")?;
        let site = match site_pos.get(&id) {
            Some(&k) => {
                if sites[k] != coord {
                    return Err(data_err(format!("line {line}: site `{id}` changes coordinates")));
                }
                k
            }
            None => {
                site_pos.insert(id.clone(), site_ids.len());
                site_ids.push(id.clone());
                sites.push(coord);
                site_ids.len() - 1
            }
        };
        let mut values = Vec::with_capacity(p);
        for (k, name) in index_names.iter().enumerate() {
            let field = &record[4 + k];
            values.push(if field.is_empty() { None } else { Some(parse_number(field, line, name)?) });
        }
        let key = (site, year.to_bits());
        if let Some((first, _)) = rows.get(&key) {
            return Err(data_err(format!(
                "line {line}: duplicate row for site `{id}`, year {year} (first at line {first})"
            )));
        }
        rows.insert(key, (line, values));
        if !years.contains(&year) {
            years.push(year);
        }
    }
    if rows.is_empty() {
        return Err(data_err("no data rows"));
    }
    years.sort_by(f64::total_cmp);

    let (n, t) = (site_ids.len(), years.len());
    let mut y = vec![0.0; t * n * p];
    let mut missing = Vec::new();
    for (ti, year) in years.iter().enumerate() {
        for (si, id) in site_ids.iter().enumerate() {
            match rows.get(&(si, year.to_bits())) {
                Some((_, values)) => {
                    for (pi, v) in values.iter().enumerate() {
                        match v {
                            Some(v) => y[(ti * n + si) * p + pi] = *v,
                            None => missing.push(format!("({id}, {year}, {})", index_names[pi])),
                        }
                    }
                }
                None => missing.push(format!("({id}, {year}, all indexes)")),
            }
        }
    }
    if !missing.is_empty() {
        let more = missing.len().saturating_sub(MAX_LISTED);
        let mut msg = format!(
            "incomplete data, missing {} cells: {}",
            missing.len(),
            missing[..missing.len().min(MAX_LISTED)].join(", ")
        );
        if more > 0 {
            msg.push_str(&format!(" and {more} more"));
        }
        return Err(data_err(msg));
    }
    ObservationTensor::new(y, site_ids, sites, years, index_names).map_err(|e| data_err(e.to_string()))
}

/// Writes rows time-slowest then site. Numbers use the shortest
/// representation that parses back to the same value.
pub fn write_dataset<W: Write>(data: &ObservationTensor, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let csv_err = |e: csv::Error| data_err(format!("cannot write dataset: {e}"));
    let mut header: Vec<String> = KEY_COLUMNS.iter().map(|s| s.to_string()).collect();
    header.extend(data.index_names().iter().cloned());
    w.write_record(&header).map_err(csv_err)?;
    for (t, year) in data.times().iter().enumerate() {
        for (s, id) in data.site_ids().iter().enumerate() {
            let c = data.sites()[s];
            let mut row = vec![id.clone(), c[0].to_string(), c[1].to_string(), year.to_string()];
            row.extend((0..data.n_indexes()).map(|p| data.get(t, s, p).to_string()));
            w.write_record(&row).map_err(csv_err)?;
        }
    }
    w.flush().map_err(|e| data_err(format!("cannot write dataset: {e}")))
}

pub fn save_dataset(data: &ObservationTensor, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(CliError::io(path))?;
    write_dataset(data, std::io::BufWriter::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = "site_id,lon,lat,year,tx,pr\n\
        a,0,0,2001,1.5,2\n\
        b,2.5,0,2001,1,3\n\
        b,2.5,0,2000,0.5,1\n\
        a,0,0,2000,-1,0\n\
        a,0,0,2002,2,2\n\
        b,2.5,0,2002,3,4\n";

    #[test]
    fn loads_complete_file() {
        let d = read_dataset(SMALL.as_bytes()).unwrap();
        assert_eq!((d.n_times(), d.n_sites(), d.n_indexes()), (3, 2, 2));
        assert_eq!(d.site_ids(), ["a", "b"]);
        assert_eq!(d.times(), [2000.0, 2001.0, 2002.0]);
        assert_eq!(d.get(0, 0, 0), -1.0);
        assert_eq!(d.get(1, 1, 1), 3.0);
        assert_eq!(d.sites()[1], [2.5, 0.0]);
    }

    #[test]
    fn missing_cell_is_named() {
        let text = SMALL.replace("b,2.5,0,2001,1,3", "b,2.5,0,2001,1,");
        let err = read_dataset(text.as_bytes()).unwrap_err().to_string();
        assert!(err.contains("(b, 2001, pr)"), "{err}");
    }

    #[test]
    fn missing_row_is_named() {
        let text = SMALL.replace("a,0,0,2002,2,2\n", "");
        let err = read_dataset(text.as_bytes()).unwrap_err().to_string();
        assert!(err.contains("(a, 2002, all indexes)"), "{err}");
    }

    #[test]
    fn duplicate_row() {
        let text = format!("{SMALL}a,0,0,2000,1,1\n");
        let err = read_dataset(text.as_bytes()).unwrap_err().to_string();
        assert!(err.contains("duplicate") && err.contains("line 8"), "{err}");
    }

    #[test]
    fn parse_error_has_line() {
        let text = SMALL.replace("1.5", "high");
        let err = read_dataset(text.as_bytes()).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("line 2") && err.to_string().contains("tx"), "{err}");
    }

    #[test]
    fn header_checked() {
        let text = SMALL.replace("site_id,lon", "site,lon");
        assert!(read_dataset(text.as_bytes()).is_err());
        assert!(read_dataset("site_id,lon,lat,year\na,0,0,1\n".as_bytes()).is_err());
    }

    #[test]
    fn moving_site_rejected() {
        let text = SMALL.replace("b,2.5,0,2000", "b,2.6,0,2000");
        assert!(read_dataset(text.as_bytes()).unwrap_err().to_string().contains("coordinates"));
    }

    #[test]
    fn full_size_grid_loads() {
        let (n, t, p) = (138, 67, 10);
        let mut text = String::from("site_id,lon,lat,year");
        for k in 0..p {
            text.push_str(&format!(",i{k}"));
        }
        text.push('\n');
        for s in 0..n {
            for y in 0..t {
                text.push_str(&format!("g{s},{},{},{}", (s % 23) as f64 * 2.5, (s / 23) as f64 * 2.5, 1951 + y));
                for k in 0..p {
                    text.push_str(&format!(",{}", (s * 7 + y * 3 + k) as f64 / 11.0));
                }
                text.push('\n');
            }
        }
        let d = read_dataset(text.as_bytes()).unwrap();
        assert_eq!((d.n_times(), d.n_sites(), d.n_indexes()), (67, 138, 10));
        assert_eq!(d.times()[66], 2017.0);
    }
}
