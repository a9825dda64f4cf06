//! On-disk cache of enumerated classes.
//!
//! One JSON document per `(surface, T, tolerance profile)`:
//!
//! ```json
//! {
//!   "format": "geodesic-classes",
//!   "version": 1,
//!   "surface": "punctured_torus",
//!   "tolerance_hash": "3f2a…",
//!   "t": 10.0,
//!   "include_powers": true,
//!   "classes": [
//!     { "id": 0, "word": "a", "length": 1.9248, "max_power": 5,
//!       "matrix": [1.0, 1.0, 1.0, 2.0] }
//!   ]
//! }
//! ```
//!
//! Words are canonical cyclic words. On load the matrix is recomputed from
//! the word and must agree with the stored entries, and the stored length with
//! its translation length.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::enumerate::{max_power, ClosedGeodesicClass};
use crate::surface::SurfaceSpec;
use crate::tolerance::ToleranceProfile;
use crate::words::{CyclicWord, Word};
use crate::{Error, Result};

pub const CACHE_FORMAT: &str = "geodesic-classes";
pub const CACHE_VERSION: u32 = 1;

/// Relative agreement required between stored and recomputed numbers.
const REL_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CachedClass {
    pub id: usize,
    pub word: String,
    pub length: f64,
    pub max_power: u32,
    pub matrix: [f64; 4],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassCache {
    pub format: String,
    pub version: u32,
    pub surface: String,
    pub tolerance_hash: String,
    pub t: f64,
    pub include_powers: bool,
    pub classes: Vec<CachedClass>,
}

impl ClassCache {
    pub fn new(
        spec: &SurfaceSpec,
        profile: &ToleranceProfile,
        t: f64,
        include_powers: bool,
        classes: &[ClosedGeodesicClass],
    ) -> Self {
        ClassCache {
            format: CACHE_FORMAT.into(),
            version: CACHE_VERSION,
            surface: spec.name().into(),
            tolerance_hash: profile.content_hash(),
            t,
            include_powers,
            classes: classes
                .iter()
                .map(|c| CachedClass {
                    id: c.id,
                    word: c.word.to_string(),
                    length: c.length,
                    max_power: c.max_power,
                    matrix: c.matrix.entries(),
                })
                .collect(),
        }
    }

    /// Rebuilds the classes, checking every record against the surface.
    pub fn classes(&self, spec: &SurfaceSpec, path: &Path) -> Result<Vec<ClosedGeodesicClass>> {
        let bad = |message: String| Error::Cache {
            path: path.to_path_buf(),
            message,
        };
        if self.format != CACHE_FORMAT || self.version != CACHE_VERSION {
            return Err(bad(format!(
                "format {} version {} is not {CACHE_FORMAT} version {CACHE_VERSION}",
                self.format, self.version
            )));
        }
        if self.surface != spec.name() {
            return Err(bad(format!(
                "cache is for surface {}, not {}",
                self.surface,
                spec.name()
            )));
        }
        let close = |a: f64, b: f64| (a - b).abs() <= REL_TOL * a.abs().max(b.abs()).max(1.0);
        let mut out = Vec::with_capacity(self.classes.len());
        for (i, c) in self.classes.iter().enumerate() {
            if c.id != i {
                return Err(bad(format!("class ids are not consecutive at position {i}")));
            }
            let word: Word = c.word.parse().map_err(|e: Error| bad(e.to_string()))?;
            let word = CyclicWord::try_from(word).map_err(|e| bad(e.to_string()))?;
            let matrix = spec.word_matrix(word.word()).map_err(|e| bad(e.to_string()))?;
            if matrix.entries().iter().zip(&c.matrix).any(|(&a, &b)| !close(a, b)) {
                return Err(bad(format!("matrix of class {i} ({}) does not match its word", c.word)));
            }
            let length = matrix.translation_length().map_err(|e| bad(e.to_string()))?;
            if !close(length, c.length) {
                return Err(bad(format!("length of class {i} ({}) does not match its word", c.word)));
            }
            if length > self.t * (1.0 + REL_TOL) {
                return Err(bad(format!("class {i} is longer than the cutoff {}", self.t)));
            }
            if c.max_power != max_power(length, self.t, self.include_powers) {
                return Err(bad(format!("power count of class {i} does not match the cutoff")));
            }
            out.push(ClosedGeodesicClass {
                id: i,
                word,
                matrix,
                length,
                max_power: c.max_power,
            });
        }
        Ok(out)
    }
}

/// `classes_<surface>_T<t>_<profile hash>.json`
pub fn cache_file_name(surface: &str, t: f64, profile: &ToleranceProfile) -> String {
    format!("classes_{surface}_T{t}_{}.json", profile.content_hash())
}

pub fn cache_path(dir: &Path, surface: &str, t: f64, profile: &ToleranceProfile) -> PathBuf {
    dir.join(cache_file_name(surface, t, profile))
}

/// Writes via a temporary file and a rename, so readers never see a partial
/// cache.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn save(path: &Path, cache: &ClassCache) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(cache).map_err(|e| Error::Cache {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

pub fn load(path: &Path) -> Result<ClassCache> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| Error::Cache {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}
