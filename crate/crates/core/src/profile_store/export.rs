use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::ProfileSet;
use crate::calendar::slot_start;
use crate::error::{Error, Result};

const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";

/// Writes the set in the long ingestion format, one row per quarter-hour
/// with local wall-clock timestamps. Values use the shortest representation
/// that parses back to the same `f64`.
pub fn write_profiles_csv(set: &ProfileSet, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = csv::Writer::from_writer(BufWriter::new(file));
    let io = |e: csv::Error| Error::csv(path, e);
    writer
        .write_record(["profile_id", "timestamp", "power_kw"])
        .map_err(io)?;
    let stamps: Vec<String> = (0..set.quarters())
        .map(|q| {
            slot_start(set.year(), q)
                .format(TIMESTAMP_FORMAT)
                .to_string()
        })
        .collect();
    let mut buf = String::new();
    for p in set {
        for (stamp, v) in stamps.iter().zip(p.power()) {
            buf.clear();
            std::fmt::Write::write_fmt(&mut buf, format_args!("{v}")).expect("string write");
            writer
                .write_record([p.id(), stamp.as_str(), buf.as_str()])
                .map_err(io)?;
        }
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

pub fn write_labels_csv(set: &ProfileSet, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut write = || -> std::io::Result<()> {
        writeln!(
            w,
            "profile_id,has_hp,has_ev,pv_inverter_kva,connection_power_kva"
        )?;
        for p in set {
            let l = p.labels();
            writeln!(
                w,
                "{},{},{},{},{}",
                csv_field(p.id()),
                l.has_hp,
                l.has_ev,
                opt(l.pv_inverter_kva),
                opt(l.connection_power_kva)
            )?;
        }
        w.flush()
    };
    write().map_err(|e| Error::io(path, e))
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
