use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use geodesic_crossings::cache::{self, cache_path, ClassCache};
use geodesic_crossings::enumerate::{enumerate_classes, ClosedGeodesicClass, EnumerationOptions};
use geodesic_crossings::surface::build_punctured_torus;
use geodesic_crossings::tolerance::ToleranceProfile;

struct Dirs {
    _base: tempfile::TempDir,
    cache: PathBuf,
    out: PathBuf,
}

fn dirs() -> Dirs {
    let base = tempfile::tempdir().unwrap();
    Dirs {
        cache: base.path().join("cache"),
        out: base.path().join("out"),
        _base: base,
    }
}

fn run(d: &Dirs, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crossings"))
        .args(args)
        .arg("--cache-dir")
        .arg(&d.cache)
        .arg("--out-dir")
        .arg(&d.out)
        .env("RUST_LOG", "info")
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn files(dir: &Path, prefix: &str) -> Vec<String> {
    let mut v: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n.starts_with(prefix))
        .collect();
    v.sort();
    v
}

#[test]
fn unknown_surface_is_a_config_error() {
    let d = dirs();
    let o = run(&d, &["enumerate", "--surface", "sphere", "--T", "2"]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("error kind=config code=2"), "{err}");
    assert!(
        err.contains("punctured_torus") && err.contains("genus2_octagon"),
        "{err}"
    );
}

#[test]
fn bad_cutoffs_are_config_errors() {
    let d = dirs();
    assert_eq!(run(&d, &["enumerate", "--T", "3,2"]).status.code(), Some(2));
    assert_eq!(run(&d, &["enumerate", "--T", "x"]).status.code(), Some(2));
}

#[test]
fn second_enumeration_hits_the_cache() {
    let d = dirs();
    let first = run(&d, &["enumerate", "--T", "3,4"]);
    assert!(first.status.success(), "{}", stderr(&first));
    assert!(!stderr(&first).contains("cache hit"));
    let second = run(&d, &["enumerate", "--T", "3,4"]);
    assert!(second.status.success());
    assert_eq!(stderr(&second).matches("cache hit").count(), 2);
    assert_eq!(first.stdout, second.stdout);
}

#[test]
fn two_generators_cross_once() {
    let d = dirs();
    let s = build_punctured_torus().unwrap();
    let profile = ToleranceProfile::default();
    let classes: Vec<ClosedGeodesicClass> = enumerate_classes(&s, 2.0, &EnumerationOptions::default())
        .unwrap()
        .into_iter()
        .filter(|c| matches!(c.word.to_string().as_str(), "a" | "b"))
        .enumerate()
        .map(|(id, c)| ClosedGeodesicClass { id, ..c })
        .collect();
    assert_eq!(classes.len(), 2);
    fs::create_dir_all(&d.cache).unwrap();
    cache::save(
        &cache_path(&d.cache, s.name(), 2.0, &profile),
        &ClassCache::new(&s, &profile, 2.0, true, &classes),
    )
    .unwrap();

    let o = run(&d, &["intersect", "--T", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let tsv = files(&d.out, "crossings_");
    assert_eq!(tsv.len(), 1);
    let text = fs::read_to_string(d.out.join(&tsv[0])).unwrap();
    assert_eq!(text.lines().count(), 2, "{text}");
    assert!(String::from_utf8_lossy(&o.stdout).contains("geometric=1\t"));
}

#[test]
fn missing_summary_is_reported_by_name() {
    let d = dirs();
    let o = run(&d, &["all", "--T", "4,5"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let summary = files(&d.out, "summary_")
        .into_iter()
        .find(|n| n.contains("_T5_"))
        .unwrap();
    fs::remove_file(d.out.join(&summary)).unwrap();
    let o = run(&d, &["report", "--T", "4,5"]);
    assert_eq!(o.status.code(), Some(3));
    let err = stderr(&o);
    assert!(err.contains("kind=missing_artifact") && err.contains(&summary), "{err}");
}

#[test]
fn missing_cache_is_reported() {
    let d = dirs();
    let o = run(&d, &["intersect", "--T", "3"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("classes_punctured_torus_T3_"));
}

#[test]
fn tolerance_changes_rename_artifacts() {
    let d = dirs();
    assert!(run(&d, &["enumerate", "--T", "2"]).status.success());
    let config = d.out.parent().unwrap().join("run.toml");
    fs::write(&config, "delta_pos = 1e-6\n").unwrap();
    let o = run(&d, &["enumerate", "--T", "2", "--config", config.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(!stderr(&o).contains("cache hit"));
    let caches = files(&d.cache, "classes_");
    assert_eq!(caches.len(), 2, "{caches:?}");
    assert_eq!(files(&d.out, "enumerate_").len(), 2);
}

#[test]
fn empty_cutoff_gives_empty_tables() {
    let d = dirs();
    let o = run(&d, &["enumerate", "--T", "1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("1\t0\t0\t0\t0"));
    let o = run(&d, &["intersect", "--T", "1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let tsv = files(&d.out, "crossings_");
    assert_eq!(fs::read_to_string(d.out.join(&tsv[0])).unwrap().lines().count(), 1);
    assert!(files(&d.out, "summary_").is_empty());
}

#[test]
fn help_exits_cleanly() {
    let o = Command::new(env!("CARGO_BIN_EXE_crossings"))
        .arg("--help")
        .output()
        .unwrap();
    assert!(o.status.success());
    for sub in [
        "enumerate",
        "intersect",
        "excursions",
        "liouville-check",
        "report",
        "all",
    ] {
        assert!(String::from_utf8_lossy(&o.stdout).contains(sub));
    }
}
