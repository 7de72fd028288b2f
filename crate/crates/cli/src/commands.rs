use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use chrono_tz::Tz;
use feedersim_core::calendar::DayRange;
use feedersim_core::profile_store::{
    ingest_profiles, load_store, profile_panels, save_store, write_labels_csv, write_panels,
    write_profiles_csv, IngestConfig,
};
use feedersim_core::sampler::{
    lct_contribution, read_samples_csv, run_sampling, write_contribution_csv, SamplingConfig,
    SamplingReport,
};
use feedersim_core::subsets::{
    apply_subset, peak_histogram, summarize as summarize_set, write_summary_table, SubsetSpec,
};
use feedersim_core::synth::{config_weather, generate_population, GeneratorConfig};
use feedersim_core::timing::{
    distributions_from_rows, feeder_envelope, figure_stem, weather_overlay, ExportFigures,
    PeakTiming,
};
use feedersim_core::weather::{ingest_weather, write_weather_csv};
use feedersim_core::{Direction, ProfileSet, WeatherSeries};

use crate::manifest::ManifestBuilder;
use crate::{
    usage, ContributionArgs, ExportArgs, Format, IngestArgs, SampleArgs, SamplingArgs,
    SummarizeArgs, SynthArgs, TimingArgs,
};

fn config_json(args: &impl serde::Serialize) -> Result<serde_json::Value> {
    Ok(serde_json::to_value(args)?)
}

/// Outputs never go into an input directory, so inputs stay untouched.
fn separate(input: &Path, out: &Path) -> Result<()> {
    // The output usually does not exist yet, so fall back to a lexical path.
    let canon = |p: &Path| {
        fs::canonicalize(p)
            .or_else(|_| std::path::absolute(p))
            .unwrap_or_else(|_| p.to_path_buf())
    };
    let (i, o) = (canon(input), canon(out));
    if o.starts_with(&i) {
        return Err(usage(format!(
            "--out {} lies inside the input {}",
            out.display(),
            input.display()
        )));
    }
    Ok(())
}

fn create_out(out: &Path) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))
}

fn open_store(store: &Path) -> Result<(ProfileSet, Option<WeatherSeries>)> {
    let (set, weather, _) =
        load_store(store).with_context(|| format!("loading store {}", store.display()))?;
    Ok((set, weather))
}

fn check_sampling(s: &SamplingArgs) -> Result<()> {
    if s.connections.is_empty() {
        return Err(usage("--connections needs at least one size"));
    }
    if s.connections.contains(&0) {
        return Err(usage("--connections sizes must be at least 1"));
    }
    let mut sorted = s.connections.clone();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != s.connections.len() {
        return Err(usage("--connections sizes must be distinct"));
    }
    if s.samples == 0 {
        return Err(usage("--samples must be at least 1"));
    }
    Ok(())
}

fn sampling_config(s: &SamplingArgs, subset: SubsetSpec) -> SamplingConfig {
    SamplingConfig {
        connections: s.connections.clone(),
        n_samples: s.samples,
        seed: s.seed,
        direction: s.direction,
        subset,
    }
}

fn run_stem(subset: &SubsetSpec, seed: u64) -> String {
    format!("{subset}_seed{seed}").replace(':', "-")
}

pub fn ingest(a: &IngestArgs) -> Result<()> {
    for input in [Some(&a.profiles), a.labels.as_ref(), a.weather.as_ref()]
        .into_iter()
        .flatten()
    {
        if fs::canonicalize(input).ok() == fs::canonicalize(&a.out).ok() {
            return Err(usage(format!("--out would overwrite {}", input.display())));
        }
    }
    let timezone: Tz = a
        .timezone
        .parse()
        .map_err(|e| usage(format!("--timezone: {e}")))?;
    let mut manifest = ManifestBuilder::new("ingest", config_json(a)?, None);
    for input in [Some(&a.profiles), a.labels.as_ref(), a.weather.as_ref()]
        .into_iter()
        .flatten()
    {
        manifest.input(input)?;
    }
    let config = IngestConfig {
        year: a.year,
        timezone,
        max_gap: a.max_gap,
        ..IngestConfig::default()
    };
    let outcome = ingest_profiles(&a.profiles, a.labels.as_deref(), &config)?;
    if outcome.set.is_empty() {
        anyhow::bail!("no valid profiles in {}", a.profiles.display());
    }
    let weather = a
        .weather
        .as_deref()
        .map(|p| ingest_weather(p, a.year))
        .transpose()?;
    save_store(&a.out, &outcome.set, weather.as_ref())?;

    let diagnostics = a.out.join("diagnostics.csv");
    let mut w = csv::Writer::from_path(&diagnostics)?;
    w.write_record(["kind", "profile_id", "line", "message"])?;
    for d in &outcome.diagnostics {
        w.write_record([
            format!("{:?}", d.kind),
            d.profile_id.clone().unwrap_or_default(),
            d.line.map(|l| l.to_string()).unwrap_or_default(),
            d.message.clone(),
        ])?;
    }
    w.flush()?;
    for d in &outcome.diagnostics {
        eprintln!("{d}");
    }
    eprintln!(
        "stored {} profiles ({} diagnostics, {} rejected)",
        outcome.set.len(),
        outcome.diagnostics.len(),
        outcome.rejected_ids().len()
    );
    manifest.finish(&a.out)?;
    Ok(())
}

pub fn synth(a: &SynthArgs) -> Result<()> {
    let mut config = match &a.config {
        Some(p) => GeneratorConfig::read(p)?,
        None => GeneratorConfig::default(),
    };
    if let Some(seed) = a.seed {
        config.seed = seed;
    }
    let mut manifest =
        ManifestBuilder::new("synth", serde_json::to_value(&config)?, Some(config.seed));
    if let Some(p) = &a.config {
        manifest.input(p)?;
    }
    let weather = config_weather(&config)?;
    let set = generate_population(&config, &weather)?;
    save_store(&a.out, &set, Some(&weather))?;
    let copy = a.out.join("generator.toml");
    fs::write(&copy, config.to_toml()).with_context(|| format!("writing {}", copy.display()))?;
    eprintln!("generated {} profiles into {}", set.len(), a.out.display());
    manifest.finish(&a.out)?;
    Ok(())
}

pub fn summarize(a: &SummarizeArgs) -> Result<()> {
    separate(&a.store, &a.out)?;
    if a.bin_width.is_nan() || a.bin_width <= 0.0 {
        return Err(usage("--bin-width must be positive"));
    }
    let mut manifest = ManifestBuilder::new("summarize", config_json(a)?, None);
    manifest.input(&a.store)?;
    let (set, _) = open_store(&a.store)?;
    create_out(&a.out)?;
    let subsets: Vec<SubsetSpec> = if a.subset.is_empty() {
        std::iter::once(SubsetSpec::All)
            .chain(SubsetSpec::builtins())
            .collect()
    } else {
        a.subset.clone()
    };
    let mut rows = Vec::new();
    for spec in &subsets {
        let selection = apply_subset(&set, spec);
        if selection.empty {
            eprintln!("subset {spec} is empty; skipped");
            continue;
        }
        rows.push((spec.name().to_string(), summarize_set(&selection.set)?));
        for direction in Direction::BOTH {
            let h = peak_histogram(&selection.set, direction, a.bin_width)?;
            let stem = format!("{spec}_{direction}_peaks").replace(':', "-");
            write_outputs(&h, a.format, &a.out, &stem)?;
        }
    }
    if a.format.tables() {
        write_summary_table(&rows, &a.out.join("summary.csv"))?;
    }
    manifest.finish(&a.out)?;
    Ok(())
}

fn write_outputs(
    item: &impl ExportFigures,
    format: Format,
    dir: &Path,
    stem: &str,
) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    if format.tables() {
        files.extend(item.export_tables(dir, stem)?);
    }
    if format.figures() {
        files.extend(item.export_svgs(dir, stem)?);
    }
    Ok(files)
}

/// `report.json`, `samples.csv`, `summary.csv` and the trend figures.
fn write_report(report: &SamplingReport, format: Format, dir: &Path) -> Result<()> {
    create_out(dir)?;
    report.write_json(&dir.join("report.json"))?;
    report.write_samples_csv(&dir.join("samples.csv"))?;
    if format.tables() {
        report.write_summary_csv(&dir.join("summary.csv"))?;
    }
    if format.figures() {
        report.export_svgs(dir, &run_stem(&report.config.subset, report.config.seed))?;
    }
    Ok(())
}

fn sample_once(set: &ProfileSet, s: &SamplingArgs, subset: SubsetSpec) -> Result<SamplingReport> {
    let report = run_sampling(set, &sampling_config(s, subset))
        .with_context(|| format!("sampling subset {subset}"))?;
    debug_assert!(report.is_ordered());
    Ok(report)
}

pub fn sample(a: &SampleArgs) -> Result<()> {
    separate(&a.store, &a.out)?;
    check_sampling(&a.sampling)?;
    let mut manifest = ManifestBuilder::new("sample", config_json(a)?, Some(a.sampling.seed));
    manifest.input(&a.store)?;
    let (set, _) = open_store(&a.store)?;
    let report = sample_once(&set, &a.sampling, a.subset)?;
    write_report(&report, a.format, &a.out)?;
    eprintln!(
        "sampled {} feeder sizes from {} profiles",
        report.sizes.len(),
        report.population
    );
    manifest.finish(&a.out)?;
    Ok(())
}

pub fn contribution(a: &ContributionArgs) -> Result<()> {
    separate(&a.store, &a.out)?;
    check_sampling(&a.sampling)?;
    let mut manifest = ManifestBuilder::new("contribution", config_json(a)?, Some(a.sampling.seed));
    manifest.input(&a.store)?;
    let (set, _) = open_store(&a.store)?;
    let with = sample_once(&set, &a.sampling, a.with_subset)?;
    let without = sample_once(&set, &a.sampling, a.without_subset)?;
    let rows = lct_contribution(&with, &without)?;
    create_out(&a.out)?;
    write_contribution_csv(&rows, &a.out.join("contribution.csv"))?;
    write_report(&with, a.format, &a.out.join("with"))?;
    write_report(&without, a.format, &a.out.join("without"))?;
    for r in &rows {
        eprintln!(
            "n = {:>4} {:<9} mean peak per connection {:+.3} kW",
            r.n_connections,
            r.direction.to_string(),
            r.peak_per_connection_kw.mean
        );
    }
    manifest.finish(&a.out)?;
    Ok(())
}

pub fn timing(a: &TimingArgs) -> Result<()> {
    separate(&a.store, &a.out)?;
    separate(&a.run, &a.out)?;
    let mut manifest = ManifestBuilder::new("timing", config_json(a)?, None);
    manifest.input(&a.store)?;
    let report_path = a.run.join("report.json");
    let samples_path = a.run.join("samples.csv");
    manifest.input(&report_path)?;
    manifest.input(&samples_path)?;
    let report = SamplingReport::read_json(&report_path)?;
    let rows = read_samples_csv(&samples_path)?;
    let (set, weather) = open_store(&a.store)?;
    if report.year != set.year() {
        anyhow::bail!(
            "run is for {} but the store holds {}",
            report.year,
            set.year()
        );
    }
    let population = apply_subset(&set, &report.config.subset).set.len();
    if population != report.population {
        anyhow::bail!(
            "run sampled {} profiles of subset {} but the store has {population}",
            report.population,
            report.config.subset
        );
    }
    if let Some(days) = a.days {
        days.validate(set.year())
            .map_err(|e| usage(format!("--days: {e}")))?;
    }
    for n in &a.connections {
        if report.result(*n, Direction::Offtake).is_none()
            && report.result(*n, Direction::Injection).is_none()
        {
            return Err(usage(format!("the run has no feeder size {n}")));
        }
    }
    create_out(&a.out)?;

    let seed = report.config.seed;
    let subset = report.config.subset;
    for dist in distributions_from_rows(&rows, report.year)? {
        if a.direction.is_some_and(|d| d != dist.direction) {
            continue;
        }
        let stem = figure_stem(&subset, dist.direction, dist.n_connections, seed);
        let overlay = weather
            .as_ref()
            .map(|w| weather_overlay(&dist, w))
            .transpose()?;
        let timing = PeakTiming {
            dist: &dist,
            overlay: overlay.as_deref(),
        };
        write_outputs(&timing, a.format, &a.out, &stem)?;

        if !a.connections.is_empty() && !a.connections.contains(&dist.n_connections) {
            continue;
        }
        let days = a
            .days
            .unwrap_or_else(|| week_around(dist.modal_day(), dist.days()));
        let envelope = feeder_envelope(
            &set,
            &report.config,
            dist.n_connections,
            dist.direction,
            days,
            weather.as_ref(),
        )?;
        write_outputs(&envelope, a.format, &a.out, &stem)?;
    }
    manifest.finish(&a.out)?;
    Ok(())
}

/// Seven days centred on `day`, kept inside the year.
fn week_around(day: usize, days: usize) -> DayRange {
    let start = day.saturating_sub(3).min(days.saturating_sub(7));
    DayRange::new(start, (start + 7).min(days))
}

pub fn export(a: &ExportArgs) -> Result<()> {
    separate(&a.store, &a.out)?;
    if a.bin_width.is_nan() || a.bin_width <= 0.0 {
        return Err(usage("--bin-width must be positive"));
    }
    let mut manifest = ManifestBuilder::new("export", config_json(a)?, None);
    manifest.input(&a.store)?;
    let (set, weather) = open_store(&a.store)?;
    for id in &a.panels {
        if set.find(id).is_none() {
            return Err(usage(format!("--panels: no profile `{id}` in the store")));
        }
    }
    create_out(&a.out)?;
    if a.format.tables() {
        write_profiles_csv(&set, &a.out.join("profiles.csv"))?;
        write_labels_csv(&set, &a.out.join("labels.csv"))?;
        if let Some(w) = &weather {
            write_weather_csv(w, &a.out.join("weather.csv"))?;
        }
    }
    for id in &a.panels {
        let p = set.find(id).expect("checked above");
        let panels = profile_panels(p, a.bin_width)?;
        let stem = format!("panel_{id}");
        if a.format.tables() {
            write_panels(&panels, &a.out, &stem)?;
        }
        if a.format.figures() {
            panels.histogram.export_svgs(&a.out, &stem)?;
        }
    }
    manifest.finish(&a.out)?;
    Ok(())
}
