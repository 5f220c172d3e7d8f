//! Dataset CSV ingestion and writing.
//!
//! Two files describe a dataset:
//! - a sequence file with one row per (dyad, interval):
//!   `dyad_id,t,maut,cdef` with 1-based contiguous `t`;
//! - a per-dyad file: `dyad_id,gender,ext_t1,ext_t2,inhibitory_control`.
//!
//! Empty cells are missing values. Both files are UTF-8 with a header
//! row.

use std::collections::HashMap;
use std::path::Path;

use crate::data::{Gender, RawDyadObservation};
use crate::error::{Error, Result};

const SEQ_HEADER: [&str; 4] = ["dyad_id", "t", "maut", "cdef"];
const DYAD_HEADER: [&str; 5] = ["dyad_id", "gender", "ext_t1", "ext_t2", "inhibitory_control"];

fn parse_opt_f64(cell: &str, what: &str, row: usize, file: &str) -> Result<Option<f64>> {
    let cell = cell.trim();
    if cell.is_empty() {
        return Ok(None);
    }
    cell.parse::<f64>().map(Some).map_err(|_| {
        Error::Ingestion(format!("{file} row {row}: cannot parse {what} `{cell}`"))
    })
}

fn check_header(record: &csv::StringRecord, expect: &[&str], file: &str) -> Result<()> {
    let got: Vec<&str> = record.iter().map(|c| c.trim()).collect();
    if got != expect {
        return Err(Error::Ingestion(format!(
            "{file}: expected header {expect:?}, got {got:?}"
        )));
    }
    Ok(())
}

/// Load a dataset from its sequence and per-dyad CSV files.
pub fn load_dataset(seq_path: &Path, dyad_path: &Path) -> Result<Vec<RawDyadObservation>> {
    let dyad_file = dyad_path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(dyad_path)?;
    let mut rows = reader.records();
    let header = rows
        .next()
        .ok_or_else(|| Error::Ingestion(format!("{dyad_file}: empty file")))??;
    check_header(&header, &DYAD_HEADER, &dyad_file)?;

    let mut order: Vec<String> = Vec::new();
    let mut dyads: HashMap<String, RawDyadObservation> = HashMap::new();
    for (i, record) in rows.enumerate() {
        let record = record?;
        let row = i + 2; // 1-based, after header
        if record.len() != DYAD_HEADER.len() {
            return Err(Error::Ingestion(format!(
                "{dyad_file} row {row}: expected {} cells, got {}",
                DYAD_HEADER.len(),
                record.len()
            )));
        }
        let id = record[0].trim().to_string();
        if id.is_empty() {
            return Err(Error::Ingestion(format!("{dyad_file} row {row}: empty dyad_id")));
        }
        if dyads.contains_key(&id) {
            return Err(Error::Ingestion(format!(
                "{dyad_file} row {row}: duplicate dyad_id `{id}`"
            )));
        }
        let gender = Gender::parse(&record[1])
            .map_err(|e| Error::Ingestion(format!("{dyad_file} row {row}: {e}")))?;
        let t1 = parse_opt_f64(&record[2], "ext_t1", row, &dyad_file)?.ok_or_else(|| {
            Error::Ingestion(format!("{dyad_file} row {row}: ext_t1 is required"))
        })?;
        let t2 = parse_opt_f64(&record[3], "ext_t2", row, &dyad_file)?;
        let inhib = parse_opt_f64(&record[4], "inhibitory_control", row, &dyad_file)?;
        order.push(id.clone());
        dyads.insert(
            id.clone(),
            RawDyadObservation {
                dyad_id: id,
                gender,
                mother_support: Vec::new(),
                child_defeat: Vec::new(),
                externalizing_t1: t1,
                externalizing_t2: t2,
                inhibitory_control: inhib,
            },
        );
    }

    let seq_file = seq_path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(seq_path)?;
    let mut rows = reader.records();
    let header = rows
        .next()
        .ok_or_else(|| Error::Ingestion(format!("{seq_file}: empty file")))??;
    check_header(&header, &SEQ_HEADER, &seq_file)?;

    // Collect intervals per dyad, then check 1..=n contiguity.
    let mut intervals: HashMap<String, Vec<(usize, Option<f64>, Option<f64>)>> = HashMap::new();
    for (i, record) in rows.enumerate() {
        let record = record?;
        let row = i + 2;
        if record.len() != SEQ_HEADER.len() {
            return Err(Error::Ingestion(format!(
                "{seq_file} row {row}: expected {} cells, got {}",
                SEQ_HEADER.len(),
                record.len()
            )));
        }
        let id = record[0].trim().to_string();
        if !dyads.contains_key(&id) {
            return Err(Error::Ingestion(format!(
                "{seq_file} row {row}: dyad `{id}` not present in {dyad_file}"
            )));
        }
        let t: usize = record[1].trim().parse().map_err(|_| {
            Error::Ingestion(format!("{seq_file} row {row}: cannot parse t `{}`", &record[1]))
        })?;
        if t == 0 {
            return Err(Error::Ingestion(format!("{seq_file} row {row}: t is 1-based")));
        }
        let maut = parse_opt_f64(&record[2], "maut", row, &seq_file)?;
        let cdef = parse_opt_f64(&record[3], "cdef", row, &seq_file)?;
        intervals.entry(id).or_default().push((t, maut, cdef));
    }

    let mut out = Vec::with_capacity(order.len());
    for id in order {
        let mut dyad = dyads.remove(&id).expect("dyad registered above");
        let mut ivs = intervals.remove(&id).ok_or_else(|| {
            Error::Ingestion(format!("dyad {id}: no intervals in {seq_file}"))
        })?;
        ivs.sort_by_key(|&(t, _, _)| t);
        for (expect, &(t, _, _)) in (1..).zip(&ivs) {
            if t != expect {
                return Err(Error::Ingestion(format!(
                    "dyad {id}: interval index {t} where {expect} was expected (gap or duplicate)"
                )));
            }
        }
        dyad.mother_support = ivs.iter().map(|&(_, m, _)| m).collect();
        dyad.child_defeat = ivs.iter().map(|&(_, _, c)| c).collect();
        dyad.validate()?;
        out.push(dyad);
    }
    Ok(out)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Write a dataset in the schemas accepted by [`load_dataset`].
pub fn write_dataset(
    dataset: &[RawDyadObservation],
    seq_path: &Path,
    dyad_path: &Path,
) -> Result<()> {
    let mut dyad_writer = csv::Writer::from_path(dyad_path)?;
    dyad_writer.write_record(DYAD_HEADER)?;
    for d in dataset {
        dyad_writer.write_record([
            d.dyad_id.as_str(),
            d.gender.label(),
            &d.externalizing_t1.to_string(),
            &fmt_opt(d.externalizing_t2),
            &fmt_opt(d.inhibitory_control),
        ])?;
    }
    dyad_writer.flush()?;

    let mut seq_writer = csv::Writer::from_path(seq_path)?;
    seq_writer.write_record(SEQ_HEADER)?;
    for d in dataset {
        for (t, (m, c)) in d.mother_support.iter().zip(&d.child_defeat).enumerate() {
            seq_writer.write_record([
                d.dyad_id.as_str(),
                &(t + 1).to_string(),
                &fmt_opt(*m),
                &fmt_opt(*c),
            ])?;
        }
    }
    seq_writer.flush()?;
    Ok(())
}
