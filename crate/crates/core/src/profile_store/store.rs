//! On-disk store: the validated population in a form that loads quickly.
//!
//! ```text
//! store.json   year, time zone, counts
//! labels.csv   ingestion label format, defines profile order
//! power.bin    profiles x quarters little-endian f64, row-major
//! weather.csv  optional, ingestion weather format
//! ```

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use chrono_tz::Tz;
use serde::{Deserialize, Serialize};

use super::{read_labels, write_labels_csv, Profile, ProfileSet};
use crate::error::{Error, Result};
use crate::weather::{ingest_weather, write_weather_csv, WeatherSeries};

const FORMAT: &str = "feedersim-store/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoreMeta {
    pub format: String,
    pub year: i32,
    pub timezone: String,
    pub profiles: usize,
    pub quarters: usize,
    pub has_weather: bool,
}

pub fn save_store(
    dir: &Path,
    set: &ProfileSet,
    weather: Option<&WeatherSeries>,
) -> Result<StoreMeta> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let meta = StoreMeta {
        format: FORMAT.into(),
        year: set.year(),
        timezone: set.timezone().name().into(),
        profiles: set.len(),
        quarters: set.quarters(),
        has_weather: weather.is_some(),
    };
    write_labels_csv(set, &dir.join("labels.csv"))?;

    let bin = dir.join("power.bin");
    let file = File::create(&bin).map_err(|e| Error::io(&bin, e))?;
    let mut w = BufWriter::new(file);
    for p in set {
        for v in p.power() {
            w.write_all(&v.to_le_bytes())
                .map_err(|e| Error::io(&bin, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(&bin, e))?;

    if let Some(ws) = weather {
        write_weather_csv(ws, &dir.join("weather.csv"))?;
    }
    let json = serde_json::to_string_pretty(&meta).expect("serializable");
    let path = dir.join("store.json");
    fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(meta)
}

pub fn load_store(dir: &Path) -> Result<(ProfileSet, Option<WeatherSeries>, StoreMeta)> {
    let path = dir.join("store.json");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let meta: StoreMeta =
        serde_json::from_str(&text).map_err(|e| Error::format(&path, e.to_string()))?;
    if meta.format != FORMAT {
        return Err(Error::format(
            &path,
            format!("unsupported store format `{}`", meta.format),
        ));
    }
    let tz: Tz = meta
        .timezone
        .parse()
        .map_err(|e| Error::format(&path, format!("time zone: {e}")))?;

    let labels = read_labels(&dir.join("labels.csv"))?;
    if labels.len() != meta.profiles {
        return Err(Error::format(
            &path,
            format!(
                "{} labels rows for {} profiles",
                labels.len(),
                meta.profiles
            ),
        ));
    }
    let bin = dir.join("power.bin");
    let expected = (meta.profiles * meta.quarters * 8) as u64;
    let file = File::open(&bin).map_err(|e| Error::io(&bin, e))?;
    let len = file.metadata().map_err(|e| Error::io(&bin, e))?.len();
    if len != expected {
        return Err(Error::format(
            &bin,
            format!("{len} bytes, expected {expected}"),
        ));
    }
    let mut r = BufReader::new(file);
    let mut row = vec![0u8; meta.quarters * 8];
    let mut profiles = Vec::with_capacity(meta.profiles);
    for (id, l) in labels {
        r.read_exact(&mut row).map_err(|e| Error::io(&bin, e))?;
        let power = row
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        profiles.push(Profile::new(id, power, l)?);
    }
    let set = ProfileSet::new(meta.year, tz, profiles)?;

    let weather = if meta.has_weather {
        Some(ingest_weather(&dir.join("weather.csv"), meta.year)?)
    } else {
        None
    };
    Ok((set, weather, meta))
}
