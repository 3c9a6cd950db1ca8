use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Metrics for one iteration of an MD-IRL run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub t: usize,
    pub eta: f64,
    pub d_agent_expert: f64,
    pub d_ref_expert: f64,
    pub regret: f64,
    pub clamped_flag: bool,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub aux: BTreeMap<String, f64>,
}

impl RunRecord {
    pub fn new(t: usize, eta: f64) -> Self {
        RunRecord {
            t,
            eta,
            d_agent_expert: 0.0,
            d_ref_expert: 0.0,
            regret: 0.0,
            clamped_flag: false,
            aux: BTreeMap::new(),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct CsvRow {
    t: usize,
    eta: f64,
    d_agent_expert: f64,
    d_ref_expert: f64,
    regret: f64,
    clamped_flag: u8,
}

pub const CSV_COLUMNS: [&str; 6] = ["t", "eta", "d_agent_expert", "d_ref_expert", "regret", "clamped_flag"];

/// Writes the fixed CSV columns; `aux` is not part of the time-series format.
pub fn write_records_csv<W: Write>(writer: W, records: &[RunRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in records {
        w.serialize(CsvRow {
            t: r.t,
            eta: r.eta,
            d_agent_expert: r.d_agent_expert,
            d_ref_expert: r.d_ref_expert,
            regret: r.regret,
            clamped_flag: u8::from(r.clamped_flag),
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records_csv<R: Read>(reader: R) -> Result<Vec<RunRecord>> {
    let mut rd = csv::Reader::from_reader(reader);
    let headers = rd.headers()?.clone();
    if headers.iter().ne(CSV_COLUMNS) {
        return Err(Error::Io(format!("unexpected CSV header: {headers:?}")));
    }
    rd.deserialize::<CsvRow>()
        .map(|row| {
            let row = row?;
            Ok(RunRecord {
                t: row.t,
                eta: row.eta,
                d_agent_expert: row.d_agent_expert,
                d_ref_expert: row.d_ref_expert,
                regret: row.regret,
                clamped_flag: row.clamped_flag != 0,
                aux: BTreeMap::new(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_is_exact() {
        let mut a = RunRecord::new(1, 2.0);
        a.d_agent_expert = 0.1 + 0.2;
        a.regret = 1.0 / 3.0;
        a.clamped_flag = true;
        let b = RunRecord::new(2, 1e-300);
        let mut buf = Vec::new();
        write_records_csv(&mut buf, &[a.clone(), b.clone()]).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,eta,d_agent_expert,d_ref_expert,regret,clamped_flag\n"));
        let back = read_records_csv(buf.as_slice()).unwrap();
        assert_eq!(back, vec![a, b]);
    }
}
