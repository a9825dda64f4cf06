//! The single set of numerical tolerances used by every module.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Tolerance for algebraic identities (determinants, matrix equality).
pub const EPS_ALG: f64 = 1e-12;
/// Tolerance for geometric predicates (point on a line, fixed points).
pub const EPS_GEOM: f64 = 1e-9;
/// Trace band above 2 treated as numerically parabolic.
pub const EPS_TRACE: f64 = 1e-10;
/// Crossings with an angle closer than this to 0 or π are flagged as near-tangential.
pub const NEAR_TANGENT: f64 = 1e-7;
/// Default radius for merging coincident crossing records.
pub const DELTA_POS: f64 = 1e-7;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToleranceProfile {
    pub id: String,
    pub eps_alg: f64,
    pub eps_geom: f64,
    pub eps_trace: f64,
    pub near_tangent: f64,
    pub delta_pos: f64,
}

impl Default for ToleranceProfile {
    fn default() -> Self {
        ToleranceProfile {
            id: "standard".to_string(),
            eps_alg: EPS_ALG,
            eps_geom: EPS_GEOM,
            eps_trace: EPS_TRACE,
            near_tangent: NEAR_TANGENT,
            delta_pos: DELTA_POS,
        }
    }
}

impl ToleranceProfile {
    /// First 12 hex digits of the SHA-256 of the profile's canonical JSON form.
    pub fn content_hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("profile serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        hex::encode(digest)[..12].to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_changes_with_profile() {
        let a = ToleranceProfile::default();
        let mut b = a.clone();
        b.delta_pos = 1e-6;
        assert_ne!(a.content_hash(), b.content_hash());
        assert_eq!(a.content_hash(), ToleranceProfile::default().content_hash());
        assert_eq!(a.content_hash().len(), 12);
    }
}
