use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::Profile;
use crate::calendar::QUARTERS_PER_DAY;
use crate::error::{Error, Result};
use crate::stats::Histogram;

pub const DEFAULT_PANEL_BIN_KW: f64 = 0.25;

/// Per-quarter-hour-of-day statistics over all days.
#[derive(Debug, Clone, PartialEq)]
pub struct QuarterEnvelope {
    pub min: Vec<f64>,
    pub mean: Vec<f64>,
    pub max: Vec<f64>,
}

/// Data behind the three-panel view of one profile: all days overlaid with
/// their envelope, the day x quarter-hour heat map, and the histogram of
/// all values.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelData {
    pub id: String,
    pub days: usize,
    /// `days x 96`, row-major; row `d` is day `d`. Serves as the heat map.
    pub daily: Vec<f64>,
    pub envelope: QuarterEnvelope,
    pub histogram: Histogram,
}

impl PanelData {
    pub fn day(&self, d: usize) -> &[f64] {
        &self.daily[d * QUARTERS_PER_DAY..(d + 1) * QUARTERS_PER_DAY]
    }

    pub fn heatmap(&self) -> &[f64] {
        &self.daily
    }
}

pub fn profile_panels(p: &Profile, bin_width: f64) -> Result<PanelData> {
    let days = p.len() / QUARTERS_PER_DAY;
    let daily = p.power()[..days * QUARTERS_PER_DAY].to_vec();
    let mut min = vec![f64::INFINITY; QUARTERS_PER_DAY];
    let mut max = vec![f64::NEG_INFINITY; QUARTERS_PER_DAY];
    let mut sum = vec![0.0; QUARTERS_PER_DAY];
    for day in daily.chunks_exact(QUARTERS_PER_DAY) {
        for (k, &v) in day.iter().enumerate() {
            min[k] = min[k].min(v);
            max[k] = max[k].max(v);
            sum[k] += v;
        }
    }
    let mean = sum.iter().map(|s| s / days as f64).collect();
    Ok(PanelData {
        id: p.id().to_string(),
        days,
        histogram: Histogram::build(&daily, bin_width)?,
        daily,
        envelope: QuarterEnvelope { min, mean, max },
    })
}

/// Writes `<stem>_daily.csv`, `<stem>_envelope.csv` and `<stem>_histogram.csv`.
pub fn write_panels(panels: &PanelData, dir: &Path, stem: &str) -> Result<Vec<PathBuf>> {
    let daily = dir.join(format!("{stem}_daily.csv"));
    write_file(&daily, |w| {
        write!(w, "day")?;
        for k in 0..QUARTERS_PER_DAY {
            write!(w, ",q{k:02}")?;
        }
        writeln!(w)?;
        for d in 0..panels.days {
            write!(w, "{d}")?;
            for v in panels.day(d) {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    })?;

    let envelope = dir.join(format!("{stem}_envelope.csv"));
    write_file(&envelope, |w| {
        writeln!(w, "quarter,min_kw,mean_kw,max_kw")?;
        let e = &panels.envelope;
        for k in 0..QUARTERS_PER_DAY {
            writeln!(w, "{k},{},{},{}", e.min[k], e.mean[k], e.max[k])?;
        }
        Ok(())
    })?;

    let histogram = dir.join(format!("{stem}_histogram.csv"));
    write_file(&histogram, |w| {
        writeln!(w, "bin_start_kw,bin_end_kw,count")?;
        for (a, b, c) in panels.histogram.bins() {
            writeln!(w, "{a},{b},{c}")?;
        }
        Ok(())
    })?;
    Ok(vec![daily, envelope, histogram])
}

pub(crate) fn write_file(
    path: &Path,
    body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    body(&mut w)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile_store::ProfileLabels;

    #[test]
    fn constant_profile_has_flat_envelope_and_one_bin() {
        let p = Profile::new("c", vec![2.0; 35_040], ProfileLabels::default()).unwrap();
        let panels = profile_panels(&p, DEFAULT_PANEL_BIN_KW).unwrap();
        assert_eq!(panels.days, 365);
        assert!(panels.envelope.min.iter().all(|&v| v == 2.0));
        assert!(panels.envelope.mean.iter().all(|&v| v == 2.0));
        assert!(panels.envelope.max.iter().all(|&v| v == 2.0));
        assert_eq!(
            panels.histogram.counts.iter().filter(|&&c| c > 0).count(),
            1
        );
        assert_eq!(panels.histogram.total(), 35_040);
    }

    #[test]
    fn envelope_mean_matches_yearly_consumption() {
        let power: Vec<f64> = (0..35_040)
            .map(|q| ((q * 37) % 101) as f64 / 10.0 - 3.0)
            .collect();
        let p = Profile::new("v", power, ProfileLabels::default()).unwrap();
        let panels = profile_panels(&p, 0.5).unwrap();
        let mean_of_means = panels.envelope.mean.iter().sum::<f64>() / 96.0;
        let expected = p.yearly_consumption() / (365.0 * 0.25 * 96.0);
        assert!((mean_of_means - expected).abs() < 1e-9);
        assert_eq!(panels.heatmap().len(), 365 * 96);
        assert_eq!(panels.day(3), &p.power()[3 * 96..4 * 96]);
    }
}
