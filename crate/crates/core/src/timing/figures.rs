use std::io::Write;
use std::path::{Path, PathBuf};

use crate::calendar::{date_of_day, slot_start, HOURS_PER_DAY, QUARTERS_PER_DAY};
use crate::error::{Error, Result};
use crate::profile_store::{write_text_file, Direction};
use crate::sampler::SamplingReport;
use crate::stats::Histogram;
use crate::subsets::SubsetSpec;
use crate::svg::{finite_range, heat_color, Axes, Svg};

use super::{FeederEnvelope, OverlayRow, PeakTimeDistribution};

/// Vector figures plus the tables they are drawn from. Every method writes
/// files named `<stem>_*` into `dir`, creating it if needed, and returns
/// their paths.
pub trait ExportFigures {
    fn export_tables(&self, dir: &Path, stem: &str) -> Result<Vec<PathBuf>>;

    fn export_svgs(&self, dir: &Path, stem: &str) -> Result<Vec<PathBuf>>;

    fn export_figures(&self, dir: &Path, stem: &str) -> Result<Vec<PathBuf>> {
        let mut files = self.export_tables(dir, stem)?;
        files.extend(self.export_svgs(dir, stem)?);
        Ok(files)
    }
}

/// `<subset>_<direction>_n<size>_seed<seed>`, safe as a file name.
pub fn figure_stem(
    subset: &SubsetSpec,
    direction: Direction,
    n_connections: usize,
    seed: u64,
) -> String {
    format!("{subset}_{direction}_n{n_connections}_seed{seed}").replace(':', "-")
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_svg(path: &Path, svg: Svg) -> Result<()> {
    let body = svg.finish();
    write_text_file(path, |w| w.write_all(body.as_bytes()))
}

const WIDTH: f64 = 960.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 70.0;
const TOP: f64 = 40.0;
const PLOT_W: f64 = 820.0;
const PLOT_H: f64 = 320.0;

/// A peak-time distribution, optionally joined with daily weather.
#[derive(Debug, Clone, Copy)]
pub struct PeakTiming<'a> {
    pub dist: &'a PeakTimeDistribution,
    pub overlay: Option<&'a [OverlayRow]>,
}

impl ExportFigures for PeakTimeDistribution {
    fn export_tables(&self, dir: &Path, stem: &str) -> Result<Vec<PathBuf>> {
        PeakTiming {
            dist: self,
            overlay: None,
        }
        .export_tables(dir, stem)
    }

    fn export_svgs(&self, dir: &Path, stem: &str) -> Result<Vec<PathBuf>> {
        PeakTiming {
            dist: self,
            overlay: None,
        }
        .export_svgs(dir, stem)
    }
}

/// Day histogram (with daily weather when there is an overlay) and the
/// hour x day heat map.
impl ExportFigures for PeakTiming<'_> {
    fn export_tables(&self, dir: &Path, stem: &str) -> Result<Vec<PathBuf>> {
        ensure_dir(dir)?;
        let (dist, overlay) = (self.dist, self.overlay);
        let days_csv = dir.join(format!("{stem}_peak_days.csv"));
        write_text_file(&days_csv, |w| {
            write!(w, "day,date,probability")?;
            if overlay.is_some() {
                write!(w, ",mean_temperature_c,max_ssrd_kw_m2")?;
            }
            writeln!(w)?;
            for (d, p) in dist.day_histogram.iter().enumerate() {
                write!(w, "{d},{},{p}", date_of_day(dist.year, d))?;
                if let Some(rows) = overlay {
                    write!(
                        w,
                        ",{},{}",
                        rows[d].mean_temperature_c, rows[d].max_ssrd_kw_m2
                    )?;
                }
                writeln!(w)?;
            }
            Ok(())
        })?;

        let cells_csv = dir.join(format!("{stem}_peak_hour_day.csv"));
        write_text_file(&cells_csv, |w| {
            write!(w, "day")?;
            for h in 0..HOURS_PER_DAY {
                write!(w, ",h{h:02}")?;
            }
            writeln!(w)?;
            for d in 0..dist.days() {
                write!(w, "{d}")?;
                for h in 0..HOURS_PER_DAY {
                    write!(w, ",{}", dist.cell(d, h))?;
                }
                writeln!(w)?;
            }
            Ok(())
        })?;
        Ok(vec![days_csv, cells_csv])
    }

    fn export_svgs(&self, dir: &Path, stem: &str) -> Result<Vec<PathBuf>> {
        ensure_dir(dir)?;
        let dist = self.dist;
        let days = dist.days() as f64;
        let top = dist.day_histogram.iter().copied().fold(0.0, f64::max);
        let axes = Axes::new((0.0, days), (0.0, top), LEFT, TOP, PLOT_W, PLOT_H);
        let mut svg = Svg::new(WIDTH, HEIGHT);
        let bar = PLOT_W / days;
        for (d, &p) in dist.day_histogram.iter().enumerate() {
            if p > 0.0 {
                let y = axes.py(p);
                svg.rect(
                    axes.px(d as f64),
                    y,
                    bar,
                    axes.py(0.0) - y,
                    "#4a6fa5",
                    Some("bar"),
                );
            }
        }
        if let Some(rows) = self.overlay {
            // Temperature on its own scale, labelled on the right.
            if let Some(range) = finite_range(rows.iter().map(|r| &r.mean_temperature_c)) {
                let t_axes = Axes::new((0.0, days), range, LEFT, TOP, PLOT_W, PLOT_H);
                let points: Vec<_> = rows
                    .iter()
                    .map(|r| {
                        (
                            t_axes.px(r.day as f64 + 0.5),
                            t_axes.py(r.mean_temperature_c),
                        )
                    })
                    .collect();
                svg.polyline(&points, "#c0392b", 1.2);
                let right = LEFT + PLOT_W;
                svg.text(
                    right + 4.0,
                    t_axes.py(t_axes.y.1) + 4.0,
                    10.0,
                    "start",
                    &format!("{:.1} C", t_axes.y.1),
                );
                svg.text(
                    right + 4.0,
                    t_axes.py(t_axes.y.0),
                    10.0,
                    "start",
                    &format!("{:.1} C", t_axes.y.0),
                );
            }
        }
        axes.draw(&mut svg, "day of year", "probability of the feeder peak");
        svg.text(
            LEFT + PLOT_W,
            TOP - 8.0,
            12.0,
            "end",
            &format!(
                "{}, n = {}, {} samples",
                dist.direction, dist.n_connections, dist.n_samples
            ),
        );
        let days_svg = dir.join(format!("{stem}_peak_days.svg"));
        write_svg(&days_svg, svg)?;

        let heat_svg = dir.join(format!("{stem}_peak_heatmap.svg"));
        let top = dist.hour_day_matrix.iter().copied().fold(0.0, f64::max);
        let axes = Axes::new(
            (0.0, days),
            (0.0, HOURS_PER_DAY as f64),
            LEFT,
            TOP,
            PLOT_W,
            PLOT_H,
        );
        let mut svg = Svg::new(WIDTH, HEIGHT);
        let cell_h = PLOT_H / HOURS_PER_DAY as f64;
        for d in 0..dist.days() {
            for h in 0..HOURS_PER_DAY {
                let p = dist.cell(d, h);
                let color = heat_color(if top > 0.0 { p / top } else { 0.0 });
                svg.rect(
                    axes.px(d as f64),
                    axes.py((h + 1) as f64),
                    bar,
                    cell_h,
                    &color,
                    Some("cell"),
                );
            }
        }
        axes.draw(&mut svg, "day of year", "hour of day");
        write_svg(&heat_svg, svg)?;
        Ok(vec![days_svg, heat_svg])
    }
}

impl ExportFigures for FeederEnvelope {
    fn export_tables(&self, dir: &Path, stem: &str) -> Result<Vec<PathBuf>> {
        ensure_dir(dir)?;
        let first = self.day_range.start * QUARTERS_PER_DAY;
        let table = dir.join(format!("{stem}_envelope.csv"));
        let weather = self.temperature_c.as_ref().zip(self.ssrd_kw_m2.as_ref());
        write_text_file(&table, |w| {
            write!(w, "quarter_index,time,min,p5,p25,median,p75,p95,max,mean")?;
            if weather.is_some() {
                write!(w, ",temperature_c,ssrd_kw_m2")?;
            }
            writeln!(w)?;
            let b = &self.bands;
            for k in 0..b.len() {
                let q = first + k;
                write!(
                    w,
                    "{q},{},{},{},{},{},{},{},{},{}",
                    slot_start(self.year, q).format("%Y-%m-%dT%H:%M"),
                    b.min[k],
                    b.p5[k],
                    b.p25[k],
                    b.median[k],
                    b.p75[k],
                    b.p95[k],
                    b.max[k],
                    b.mean[k]
                )?;
                if let Some((t, s)) = weather {
                    write!(w, ",{},{}", t[k], s[k])?;
                }
                writeln!(w)?;
            }
            Ok(())
        })?;

        let days = dir.join(format!("{stem}_envelope_days.csv"));
        write_text_file(&days, |w| {
            writeln!(
                w,
                "day,date,peak_probability,modal_peak_quarter,modal_peak_time"
            )?;
            for (k, day) in self.day_range.days().enumerate() {
                let m = self.modal_peak_quarter[k];
                writeln!(
                    w,
                    "{day},{},{},{m},{:02}:{:02}",
                    date_of_day(self.year, day),
                    self.day_peak_probability[k],
                    m / 4,
                    (m % 4) * 15
                )?;
            }
            Ok(())
        })?;
        Ok(vec![table, days])
    }

    fn export_svgs(&self, dir: &Path, stem: &str) -> Result<Vec<PathBuf>> {
        ensure_dir(dir)?;
        let figure = dir.join(format!("{stem}_envelope.svg"));
        write_svg(&figure, self.draw())?;
        Ok(vec![figure])
    }
}

impl FeederEnvelope {
    /// Nested bands with the median, daily peak probability as a strip
    /// below, and weather lines rescaled to the panel height (their raw
    /// values are in the table).
    fn draw(&self) -> Svg {
        let b = &self.bands;
        let len = b.len() as f64;
        let (lo, hi) = finite_range(b.min.iter().chain(&b.max)).unwrap_or((0.0, 1.0));
        let strip = 60.0;
        let main_h = PLOT_H - strip - 20.0;
        let axes = Axes::new((0.0, len), (lo, hi), LEFT, TOP, PLOT_W, main_h);
        let mut svg = Svg::new(WIDTH, HEIGHT + 20.0);

        let band = |svg: &mut Svg, lower: &[f64], upper: &[f64], opacity: f64| {
            let mut points: Vec<_> = upper
                .iter()
                .enumerate()
                .map(|(k, &v)| (axes.px(k as f64), axes.py(v)))
                .collect();
            points.extend(
                lower
                    .iter()
                    .enumerate()
                    .rev()
                    .map(|(k, &v)| (axes.px(k as f64), axes.py(v))),
            );
            svg.polygon(&points, "#2c7fb8", opacity);
        };
        band(&mut svg, &b.min, &b.max, 0.15);
        band(&mut svg, &b.p5, &b.p95, 0.25);
        band(&mut svg, &b.p25, &b.p75, 0.35);
        let line = |values: &[f64]| -> Vec<(f64, f64)> {
            values
                .iter()
                .enumerate()
                .map(|(k, &v)| (axes.px(k as f64), axes.py(v)))
                .collect()
        };
        svg.polyline(&line(&b.median), "#08306b", 1.2);

        let mut rescaled = |values: &Option<Vec<f64>>, color: &str| {
            let Some(values) = values else { return };
            let Some(range) = finite_range(values) else {
                return;
            };
            let scaled = Axes::new((0.0, len), range, LEFT, TOP, PLOT_W, main_h);
            let points: Vec<_> = values
                .iter()
                .enumerate()
                .map(|(k, &v)| (scaled.px(k as f64), scaled.py(v)))
                .collect();
            svg.polyline(&points, color, 0.8);
        };
        rescaled(&self.temperature_c, "#c0392b");
        rescaled(&self.ssrd_kw_m2, "#e6a817");

        // Modal time of the day-local extreme.
        for (k, &m) in self.modal_peak_quarter.iter().enumerate() {
            let x = axes.px((k * QUARTERS_PER_DAY + m) as f64);
            svg.polygon(
                &[(x - 4.0, TOP - 10.0), (x + 4.0, TOP - 10.0), (x, TOP - 2.0)],
                "#333333",
                1.0,
            );
        }
        axes.draw(&mut svg, "", &format!("feeder {} (kW)", self.direction));

        let strip_top = TOP + main_h + 40.0;
        let strip_axes = Axes::new((0.0, len), (0.0, 1.0), LEFT, strip_top, PLOT_W, strip);
        let day_w = PLOT_W / self.day_peak_probability.len().max(1) as f64;
        for (k, &p) in self.day_peak_probability.iter().enumerate() {
            let y = strip_axes.py(p);
            svg.rect(
                strip_axes.px((k * QUARTERS_PER_DAY) as f64),
                y,
                day_w,
                strip_axes.py(0.0) - y,
                "#636363",
                Some("bar"),
            );
        }
        svg.line(
            LEFT,
            strip_top + strip,
            LEFT + PLOT_W,
            strip_top + strip,
            "black",
        );
        svg.text(
            LEFT,
            strip_top - 4.0,
            10.0,
            "start",
            "probability of the year peak on that day",
        );
        svg.text(
            LEFT + PLOT_W,
            strip_top + strip + 16.0,
            10.0,
            "end",
            &format!(
                "days {} of {}, n = {}, {} samples",
                self.day_range, self.year, self.n_connections, self.n_samples
            ),
        );
        svg
    }
}

impl ExportFigures for SamplingReport {
    fn export_tables(&self, dir: &Path, stem: &str) -> Result<Vec<PathBuf>> {
        ensure_dir(dir)?;
        let table = dir.join(format!("{stem}_summary.csv"));
        self.write_summary_csv(&table)?;
        Ok(vec![table])
    }

    /// Per direction, per-connection peak and simultaneity against feeder
    /// size: the mean with the p5 to p95 band.
    fn export_svgs(&self, dir: &Path, stem: &str) -> Result<Vec<PathBuf>> {
        ensure_dir(dir)?;
        let mut out = Vec::new();
        for &direction in self.config.direction.directions() {
            let rows: Vec<_> = self
                .sizes
                .iter()
                .filter_map(|s| {
                    self.result(s.n_connections, direction)
                        .map(|r| (s.n_connections as f64, r))
                })
                .collect();
            let mut svg = Svg::new(WIDTH, 2.0 * HEIGHT);
            let panels = [
                (
                    "peak per connection (kW)",
                    rows.iter()
                        .map(|(n, r)| (*n, Some(&r.peak_per_connection_kw)))
                        .collect::<Vec<_>>(),
                ),
                (
                    "simultaneity factor",
                    rows.iter()
                        .map(|(n, r)| (*n, r.simultaneity.as_ref()))
                        .collect(),
                ),
            ];
            for (p, (label, points)) in panels.iter().enumerate() {
                let points: Vec<_> = points
                    .iter()
                    .filter_map(|(n, d)| d.map(|d| (*n, d)))
                    .collect();
                let xs = finite_range(points.iter().map(|(n, _)| n)).unwrap_or((0.0, 1.0));
                let ys = finite_range(points.iter().flat_map(|(_, d)| [&d.p5, &d.p95]))
                    .unwrap_or((0.0, 1.0));
                let axes = Axes::new(xs, ys, LEFT, TOP + p as f64 * HEIGHT, PLOT_W, PLOT_H);
                let mut band: Vec<_> = points
                    .iter()
                    .map(|(n, d)| (axes.px(*n), axes.py(d.p95)))
                    .collect();
                band.extend(
                    points
                        .iter()
                        .rev()
                        .map(|(n, d)| (axes.px(*n), axes.py(d.p5))),
                );
                svg.polygon(&band, "#2c7fb8", 0.25);
                let mean: Vec<_> = points
                    .iter()
                    .map(|(n, d)| (axes.px(*n), axes.py(d.mean)))
                    .collect();
                svg.polyline(&mean, "#08306b", 1.5);
                axes.draw(&mut svg, "connections", label);
            }
            let path = dir.join(format!("{stem}_{direction}_trend.svg"));
            write_svg(&path, svg)?;
            out.push(path);
        }
        Ok(out)
    }
}

impl ExportFigures for Histogram {
    fn export_tables(&self, dir: &Path, stem: &str) -> Result<Vec<PathBuf>> {
        ensure_dir(dir)?;
        let table = dir.join(format!("{stem}_histogram.csv"));
        write_text_file(&table, |w| {
            writeln!(w, "bin_start,bin_end,count")?;
            for (a, b, c) in self.bins() {
                writeln!(w, "{a},{b},{c}")?;
            }
            Ok(())
        })?;
        Ok(vec![table])
    }

    fn export_svgs(&self, dir: &Path, stem: &str) -> Result<Vec<PathBuf>> {
        ensure_dir(dir)?;
        let k = self.counts.len();
        let x = (self.bin_start(0), self.bin_start(k));
        let top = self.counts.iter().copied().max().unwrap_or(0) as f64;
        let axes = Axes::new(x, (0.0, top), LEFT, TOP, PLOT_W, PLOT_H);
        let mut svg = Svg::new(WIDTH, HEIGHT);
        for (a, b, c) in self.bins() {
            if c > 0 {
                let y = axes.py(c as f64);
                svg.rect(
                    axes.px(a),
                    y,
                    axes.px(b) - axes.px(a),
                    axes.py(0.0) - y,
                    "#4a6fa5",
                    Some("bar"),
                );
            }
        }
        axes.draw(&mut svg, "kW", "count");
        let figure = dir.join(format!("{stem}_histogram.svg"));
        write_svg(&figure, svg)?;
        Ok(vec![figure])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::SampleRecord;
    use crate::timing::peak_time_distribution;

    fn dist() -> PeakTimeDistribution {
        let samples: Vec<_> = (0..20)
            .map(|i| SampleRecord {
                sample_id: i,
                peak_kw: 3.0,
                peak_quarter_index: (i * 1777) % 35_040,
                simultaneity: Some(0.5),
            })
            .collect();
        peak_time_distribution(&samples, Direction::Offtake, 40, 2022).unwrap()
    }

    #[test]
    fn heatmap_has_one_cell_per_day_and_hour() {
        let dir = tempfile::tempdir().unwrap();
        let files = dist().export_figures(dir.path(), "x").unwrap();
        assert_eq!(files.len(), 4);
        let heat = std::fs::read_to_string(dir.path().join("x_peak_heatmap.svg")).unwrap();
        assert_eq!(heat.matches(r#"class="cell""#).count(), 365 * 24);
    }

    #[test]
    fn output_is_byte_stable() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        for dir in [&a, &b] {
            dist().export_figures(dir.path(), "s").unwrap();
        }
        for name in [
            "s_peak_days.csv",
            "s_peak_hour_day.csv",
            "s_peak_days.svg",
            "s_peak_heatmap.svg",
        ] {
            assert_eq!(
                std::fs::read(a.path().join(name)).unwrap(),
                std::fs::read(b.path().join(name)).unwrap()
            );
        }
    }

    #[test]
    fn histogram_without_values_still_renders() {
        let dir = tempfile::tempdir().unwrap();
        let h = Histogram::build(&[], 0.5).unwrap();
        let files = h.export_figures(dir.path(), "empty").unwrap();
        let svg = std::fs::read_to_string(&files[1]).unwrap();
        assert_eq!(files.len(), 2);
        assert!(svg.contains("</svg>"));
        assert!(!svg.contains(r#"class="bar""#));
    }

    #[test]
    fn unwritable_directory_fails() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("plain");
        std::fs::write(&file, "x").unwrap();
        assert!(dist().export_figures(&file.join("sub"), "s").is_err());
    }

    #[test]
    fn stems_encode_the_run() {
        assert_eq!(
            figure_stem(&SubsetSpec::HP, Direction::Offtake, 40, 7),
            "hp_offtake_n40_seed7"
        );
        let custom = SubsetSpec::EvHighPower { threshold_kw: 7.0 };
        assert_eq!(
            figure_stem(&custom, Direction::Injection, 10, 0),
            "ev-high-7_injection_n10_seed0"
        );
    }
}
