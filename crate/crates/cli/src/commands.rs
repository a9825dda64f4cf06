//! The subcommands. Each reads its inputs from the cache and output
//! directories and leaves existing outputs alone unless forced.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use geodesic_crossings::cache::{self, cache_path, ClassCache, CACHE_VERSION};
use geodesic_crossings::crossings::{
    find_crossings, find_crossings_into, multiplicity_collapse, write_tsv, CountSink, CrossingOptions,
};
use geodesic_crossings::cusp::excursion_histogram;
use geodesic_crossings::enumerate::{
    count_length, enumerate_classes, restrict_to, ClosedGeodesicClass, EnumerationOptions,
};
use geodesic_crossings::harness::{
    all_excursions, analyze_cutoff, build_report, liouville_check, trace_all, ConvergenceReport, CutoffRow,
};
use geodesic_crossings::partition::CellPartition;
use geodesic_crossings::surface::SurfaceSpec;
use geodesic_crossings::tolerance::ToleranceProfile;
use geodesic_crossings::{Error, Exec};
use log::{info, warn};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

pub struct Context {
    pub cfg: RunConfig,
    pub spec: SurfaceSpec,
    pub profile: ToleranceProfile,
    pub hash: String,
    pub exec: Exec,
    pub force: bool,
}

impl Context {
    pub fn new(cfg: RunConfig, force: bool) -> CliResult<Self> {
        cfg.prepare_dirs()?;
        let spec = cfg.surface_kind()?.build()?;
        let profile = cfg.profile();
        Ok(Context {
            hash: profile.content_hash(),
            exec: cfg.exec(),
            spec,
            profile,
            cfg,
            force,
        })
    }

    fn surface(&self) -> &str {
        self.spec.name()
    }

    fn cache_file(&self, t: f64) -> PathBuf {
        cache_path(&self.cfg.cache_dir, self.surface(), t, &self.profile)
    }

    /// `<kind>_<surface>_T<t>_<hash>.<ext>` in the output directory.
    fn out_file(&self, kind: &str, t: f64, ext: &str) -> PathBuf {
        self.cfg
            .out_dir
            .join(format!("{kind}_{}_T{t}_{}.{ext}", self.surface(), self.hash))
    }

    /// Like [`out_file`] for artifacts covering every cutoff.
    fn sweep_file(&self, kind: &str, ext: &str) -> PathBuf {
        let ts: Vec<String> = self.cfg.t.iter().map(|t| t.to_string()).collect();
        self.cfg.out_dir.join(format!(
            "{kind}_{}_T{}_{}.{ext}",
            self.surface(),
            ts.join("-"),
            self.hash
        ))
    }

    fn skip(&self, path: &Path) -> bool {
        let exists = path.exists();
        if exists && !self.force {
            info!("{} exists; skipping (use --force to recompute)", path.display());
        }
        exists && !self.force
    }

    fn load_classes(&self, t: f64) -> CliResult<Vec<ClosedGeodesicClass>> {
        let path = self.cache_file(t);
        if !path.exists() {
            return Err(CliError::missing(&path));
        }
        let cache = cache::load(&path)?;
        if cache.t != t || cache.include_powers != self.cfg.include_powers || cache.tolerance_hash != self.hash {
            return Err(Error::Cache {
                path,
                message: "cache settings differ from the run configuration".into(),
            }
            .into());
        }
        Ok(cache.classes(&self.spec, &path)?)
    }
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    Ok(cache::write_atomic(path, text.as_bytes())?)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::consistency(format!("cannot serialize {}: {e}", path.display())))?;
    text.push('\n');
    write_text(path, &text)
}

pub fn enumerate(ctx: &Context) -> CliResult<()> {
    let missing: Vec<f64> = ctx
        .cfg
        .t
        .iter()
        .copied()
        .filter(|&t| ctx.force || !ctx.cache_file(t).exists())
        .collect();
    if let Some(&t_max) = missing.last() {
        let opts = EnumerationOptions {
            include_powers: ctx.cfg.include_powers,
            exec: ctx.exec,
            ..EnumerationOptions::default()
        };
        let all = enumerate_classes(&ctx.spec, t_max, &opts)?;
        info!("enumerated {} classes up to T = {t_max}", all.len());
        for &t in &missing {
            let classes = restrict_to(&all, t, ctx.cfg.include_powers);
            let path = ctx.cache_file(t);
            cache::save(
                &path,
                &ClassCache::new(&ctx.spec, &ctx.profile, t, ctx.cfg.include_powers, &classes),
            )?;
            info!("wrote {}", path.display());
        }
    }
    let mut table = String::from("t\tclasses\tclasses_with_powers\ttotal_length\tlength_ratio\n");
    for &t in &ctx.cfg.t {
        if !missing.contains(&t) {
            info!("cache hit for T = {t}: {}", ctx.cache_file(t).display());
        }
        let classes = ctx.load_classes(t)?;
        let with_powers: u64 = classes.iter().map(|c| u64::from(c.max_power)).sum();
        let l = count_length(&classes);
        let _ = writeln!(table, "{t}\t{}\t{with_powers}\t{l}\t{}", classes.len(), l / t.exp());
    }
    write_text(&ctx.sweep_file("enumerate", "tsv"), &table)?;
    write_text(
        &ctx.cfg.out_dir.join(format!("surface_{}.txt", ctx.surface())),
        &ctx.spec.describe(),
    )?;
    print!("{table}");
    Ok(())
}

pub fn intersect(ctx: &Context) -> CliResult<()> {
    let partition = CellPartition::build(&ctx.spec, ctx.cfg.cells, ctx.cfg.core_eps)?;
    let harness = ctx.cfg.harness();
    // a misplaced arc is a configuration problem, not a data problem
    harness.arc.prepare(&ctx.spec, &partition)?;
    for &t in &ctx.cfg.t {
        let summary = ctx.out_file("summary", t, "json");
        let records_file = ctx.out_file("crossings", t, "tsv");
        let export = t <= ctx.cfg.export_records_max_t;
        if !ctx.force && summary.exists() && (!export || records_file.exists()) {
            info!("outputs for T = {t} exist; skipping (use --force to recompute)");
            continue;
        }
        let classes = ctx.load_classes(t)?;
        if export {
            let chains = trace_all(&ctx.spec, &classes, ctx.exec)?;
            let opts = CrossingOptions {
                exec: ctx.exec,
                cell_size: None,
            };
            let records = multiplicity_collapse(&find_crossings(&ctx.spec, &chains, &opts), ctx.cfg.delta_pos);
            let mut bytes = Vec::new();
            write_tsv(&records, &mut bytes).map_err(|e| Error::io(&records_file, e))?;
            cache::write_atomic(&records_file, &bytes)?;
        }
        if classes.is_empty() {
            warn!("no classes at T = {t}; statistics are undefined and no summary is written");
            println!("T={t}\tclasses=0\tgeometric=0\tordered=0\tself=0");
            continue;
        }
        let row = match analyze_cutoff(&ctx.spec, &classes, t, &harness, &partition, ctx.exec) {
            Ok(row) => row,
            Err(Error::Domain(msg)) => {
                // totals are still well defined
                let chains = trace_all(&ctx.spec, &classes, ctx.exec)?;
                let opts = CrossingOptions {
                    exec: ctx.exec,
                    cell_size: None,
                };
                let c = find_crossings_into(&ctx.spec, &chains, &opts, CountSink::default);
                warn!("statistics undefined at T = {t}: {msg}; no summary written");
                println!(
                    "T={t}\tclasses={}\tgeometric={}\tordered={}\tself={}",
                    classes.len(),
                    c.geometric,
                    c.ordered_total(),
                    c.self_crossings
                );
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        write_json(&summary, &row)?;
        println!(
            "T={t}\tclasses={}\tgeometric={}\tordered={}\tself={}",
            row.classes, row.geometric_crossings, row.ordered_total, row.self_crossings
        );
    }
    Ok(())
}

pub fn excursions(ctx: &Context) -> CliResult<()> {
    if !ctx.spec.is_cusped() {
        warn!("{} has no cusps; nothing to do", ctx.surface());
        return Ok(());
    }
    for &t in &ctx.cfg.t {
        let path = ctx.out_file("excursions", t, "tsv");
        if ctx.skip(&path) {
            continue;
        }
        let classes = ctx.load_classes(t)?;
        let chains = trace_all(&ctx.spec, &classes, ctx.exec)?;
        let ex = all_excursions(&ctx.spec, &chains, ctx.exec)?;
        let h = excursion_histogram(&ex, &chains, t);
        let mut table = String::from("n\tE_n\tE_n_over_length\n");
        for n in 0..h.counts.len() {
            let _ = writeln!(table, "{n}\t{}\t{}", h.count(n), h.normalized(n));
        }
        write_text(&path, &table)?;
        let slope = h.loglog_slope(2, 20).map_or("undefined".to_string(), |s| s.to_string());
        println!(
            "T={t}\texcursions={}\tmax_winding={}\tc_fit={}\tslope_2_20={slope}",
            h.excursions,
            h.max_winding(),
            h.c_fit.map_or("undefined".to_string(), |c| c.to_string())
        );
    }
    Ok(())
}

pub fn liouville(ctx: &Context) -> CliResult<()> {
    let path = ctx
        .cfg
        .out_dir
        .join(format!("liouville_{}_{}.json", ctx.surface(), ctx.hash));
    if ctx.skip(&path) {
        return Ok(());
    }
    let check = liouville_check(&ctx.spec, ctx.cfg.seed)?;
    write_json(&path, &check)?;
    println!(
        "box_additivity_error={:e}\tmoebius_invariance_error={:e}\tarc_measure_error={:e}\tliouville_length={}\tpushforward_factor={}\tsampler_ks={}",
        check.box_additivity_error,
        check.moebius_invariance_error,
        check.arc_measure_error,
        check.liouville_length,
        check.pushforward_factor,
        check.sampler_ks
    );
    Ok(())
}

/// The report document: resolved configuration plus every statistic.
#[derive(Serialize)]
struct ReportDocument<'a> {
    config: &'a RunConfig,
    report: &'a ConvergenceReport,
}

pub fn report(ctx: &Context) -> CliResult<()> {
    let path = ctx.sweep_file("report", "json");
    let mut rows = Vec::new();
    for &t in &ctx.cfg.t {
        let summary = ctx.out_file("summary", t, "json");
        if !summary.exists() {
            return Err(CliError::missing(&summary));
        }
        let text = fs::read_to_string(&summary).map_err(|e| Error::io(&summary, e))?;
        let row: CutoffRow = serde_json::from_str(&text).map_err(|e| Error::Cache {
            path: summary.clone(),
            message: e.to_string(),
        })?;
        if row.t != t {
            return Err(Error::consistency(format!("{} holds T = {}, expected {t}", summary.display(), row.t)).into());
        }
        rows.push(row);
    }
    if ctx.skip(&path) {
        return Ok(());
    }
    let report = build_report(
        &ctx.spec,
        rows,
        &ctx.cfg.harness(),
        &ctx.profile,
        CACHE_VERSION,
        ctx.cfg.include_powers,
        ctx.exec,
    )?;
    write_json(
        &path,
        &ReportDocument {
            config: &ctx.cfg,
            report: &report,
        },
    )?;
    write_text(&ctx.sweep_file("report_rows", "tsv"), &rows_table(&report))?;
    write_text(&ctx.sweep_file("report_cusp_mass", "tsv"), &cusp_table(&report))?;
    write_text(&ctx.sweep_file("report_excursions", "tsv"), &excursion_table(&report))?;
    if let Some(f) = &report.fixture {
        let mut t = String::from("n\tword\tlength\tlength_minus_2_log_n\tself_crossings\tbrute_force\tmax_winding\n");
        for r in &f.rows {
            let _ = writeln!(
                t,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}",
                r.n,
                r.word,
                r.length,
                opt(r.excess),
                r.self_crossings,
                r.brute_force.map_or(String::new(), |b| b.to_string()),
                r.max_winding
            );
        }
        write_text(&ctx.sweep_file("report_fixture", "tsv"), &t)?;
    }
    let mut checks = String::from("name\tpass\tvalue\tthreshold\n");
    for c in &report.checks {
        let _ = writeln!(checks, "{}\t{}\t{}\t{}", c.name, c.pass, c.value, c.threshold);
        println!(
            "{} {}: {} (gate {})",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.value,
            c.threshold
        );
    }
    write_text(&ctx.sweep_file("report_checks", "tsv"), &checks)?;
    info!("wrote {}", path.display());
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |v| v.to_string())
}

fn rows_table(report: &ConvergenceReport) -> String {
    let mut out = String::from(
        "t\tclasses\tclasses_with_powers\tsegments\ttotal_length\tlength_ratio\tgeometric_crossings\tordered_total\t\
         self_crossings\tnear_tangent\tcore_fraction\tgrowth_r\tgrowth_r_prime\tspatial_tv\tangle_ks\tangle_records\t\
         footprint_tv\tdirection_ratio\tarc_ks\tarc_crossings\tarc_constant\tarc_reference_constant\t\
         excursion_slope_2_20\tc_fit\tmax_winding\tpair_violations\n",
    );
    for r in &report.rows {
        let e = r.excursions.as_ref();
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.t,
            r.classes,
            r.classes_with_powers,
            r.segments,
            r.total_length,
            r.length_ratio,
            r.geometric_crossings,
            r.ordered_total,
            r.self_crossings,
            r.near_tangent,
            r.core_fraction,
            r.growth_r,
            r.growth_r_prime,
            r.spatial_tv,
            opt(r.angle.ks),
            r.angle.records,
            r.footprint.tv,
            opt(r.footprint.direction_ratio),
            opt(r.arc.ks),
            r.arc.crossings,
            r.arc.constant,
            r.arc.reference_constant,
            opt(e.and_then(|e| e.slope_2_20)),
            opt(e.and_then(|e| e.histogram.c_fit)),
            e.map_or(String::new(), |e| e.max_winding.to_string()),
            e.map_or(String::new(), |e| e.pair_violations.to_string()),
        );
    }
    out
}

fn cusp_table(report: &ConvergenceReport) -> String {
    let mut out = String::from("t\tr\tmass\tmass_over_exp_2t\n");
    for row in &report.rows {
        for m in &row.cusp_mass {
            let _ = writeln!(out, "{}\t{}\t{}\t{}", m.t, m.r, m.mass, m.ratio);
        }
    }
    out
}

fn excursion_table(report: &ConvergenceReport) -> String {
    let mut out = String::from("t\tn\tE_n\tE_n_over_length\n");
    for row in &report.rows {
        if let Some(e) = &row.excursions {
            for n in 0..e.histogram.counts.len() {
                let _ = writeln!(
                    out,
                    "{}\t{n}\t{}\t{}",
                    row.t,
                    e.histogram.count(n),
                    e.histogram.normalized(n)
                );
            }
        }
    }
    out
}

pub fn all(ctx: &Context) -> CliResult<()> {
    enumerate(ctx)?;
    intersect(ctx)?;
    excursions(ctx)?;
    liouville(ctx)?;
    report(ctx)
}
