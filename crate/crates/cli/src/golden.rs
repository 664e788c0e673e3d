// Copyright 2026 vflux Contributors
// SPDX-License-Identifier: Apache-2.0

//! Golden-file regression corpus.
//!
//! A manifest lists cases; each binds a config to the SHA-256 digest of the
//! canonical CSV it produces and keeps that CSV next to it. A case passes
//! when the digest matches. When it does not, the stored CSV is compared
//! cell by cell under the case's tolerance (`atol = 1e-12` for exact
//! cases), which keeps the corpus usable across platforms whose last-bit
//! rounding differs.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::load_config;
use crate::error::{CliError, Result};
use crate::run::{run_with_threads, threads_from_env};
use crate::table::sha256_hex;

pub const MANIFEST_SCHEMA: &str = "vflux-golden/1";
pub const MAINTAINER_ENV: &str = "VFLUX_MAINTAINER";
/// Absolute tolerance of the fallback comparison for exact cases.
pub const NUMERIC_FALLBACK_ATOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TolerancePolicy {
    Exact,
    Numeric { atol: f64, rtol: f64 },
}

impl TolerancePolicy {
    fn bounds(self) -> (f64, f64) {
        match self {
            TolerancePolicy::Exact => (NUMERIC_FALLBACK_ATOL, 0.0),
            TolerancePolicy::Numeric { atol, rtol } => (atol, rtol),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GoldenCase {
    pub name: String,
    pub config_path: PathBuf,
    pub csv_path: PathBuf,
    pub expected_digest: String,
    pub tolerance: TolerancePolicy,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawManifest {
    schema: String,
    #[serde(rename = "case", default)]
    cases: Vec<RawCase>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCase {
    name: String,
    config: String,
    csv: String,
    digest: String,
    tolerance: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    atol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rtol: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Manifest {
    pub path: PathBuf,
    pub cases: Vec<GoldenCase>,
    raw: RawManifest,
}

pub fn load_manifest(path: &Path) -> Result<Manifest> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read manifest {}: {e}", path.display())))?;
    let raw: RawManifest = toml::from_str(&text).map_err(|e| CliError::Parse {
        origin: path.display().to_string(),
        message: e.to_string(),
    })?;
    if raw.schema != MANIFEST_SCHEMA {
        return Err(CliError::Golden(format!(
            "{}: schema `{}`, expected `{MANIFEST_SCHEMA}`",
            path.display(),
            raw.schema
        )));
    }
    let dir = path.parent().unwrap_or(Path::new("."));
    let cases = raw
        .cases
        .iter()
        .map(|c| {
            let tolerance = match c.tolerance.as_str() {
                "exact" => TolerancePolicy::Exact,
                "numeric" => TolerancePolicy::Numeric {
                    atol: c.atol.unwrap_or(NUMERIC_FALLBACK_ATOL),
                    rtol: c.rtol.unwrap_or(0.0),
                },
                other => {
                    return Err(CliError::Golden(format!(
                        "case {}: tolerance `{other}` is neither `exact` nor `numeric`",
                        c.name
                    )))
                }
            };
            Ok(GoldenCase {
                name: c.name.clone(),
                config_path: dir.join(&c.config),
                csv_path: dir.join(&c.csv),
                expected_digest: c.digest.clone(),
                tolerance,
            })
        })
        .collect::<Result<_>>()?;
    Ok(Manifest {
        path: path.to_path_buf(),
        cases,
        raw,
    })
}

/// Canonical CSV of a case's config.
pub fn render(case: &GoldenCase) -> Result<Vec<u8>> {
    if !case.config_path.is_file() {
        return Err(CliError::Golden(format!(
            "case {}: config {} does not exist",
            case.name,
            case.config_path.display()
        )));
    }
    let config = load_config(&case.config_path, None)?;
    Ok(run_with_threads(&config, threads_from_env()?)?.to_csv())
}

/// Cell-level comparison of two CSV documents.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CsvDiff {
    pub header_changed: bool,
    pub old_rows: usize,
    pub new_rows: usize,
    /// Zero-based data-row indices that differ beyond tolerance, including
    /// rows present on one side only.
    pub changed_rows: Vec<usize>,
    /// Largest absolute difference among numeric cells present on both sides.
    pub max_abs_diff: f64,
}

impl CsvDiff {
    pub fn is_clean(&self) -> bool {
        !self.header_changed && self.changed_rows.is_empty()
    }

    pub fn summary(&self) -> String {
        if self.is_clean() {
            return format!(
                "{} rows, max |diff| {:.3e}",
                self.new_rows, self.max_abs_diff
            );
        }
        let shown: Vec<String> = self
            .changed_rows
            .iter()
            .take(20)
            .map(|r| r.to_string())
            .collect();
        let more = if self.changed_rows.len() > 20 {
            format!(" (+{} more)", self.changed_rows.len() - 20)
        } else {
            String::new()
        };
        format!(
            "{}rows {} -> {}, {} changed: [{}]{more}, max |diff| {:.3e}",
            if self.header_changed {
                "header changed; "
            } else {
                ""
            },
            self.old_rows,
            self.new_rows,
            self.changed_rows.len(),
            shown.join(", "),
            self.max_abs_diff,
        )
    }
}

fn records(bytes: &[u8]) -> Result<Vec<csv::StringRecord>> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(bytes)
        .records()
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Golden(format!("unreadable csv: {e}")))
}

fn cell_close(a: &str, b: &str, atol: f64, rtol: f64, max_diff: &mut f64) -> bool {
    if a == b {
        return true;
    }
    match (a.parse::<f64>(), b.parse::<f64>()) {
        (Ok(x), Ok(y)) => {
            if x.is_nan() && y.is_nan() {
                return true;
            }
            let d = (x - y).abs();
            if d.is_finite() {
                *max_diff = max_diff.max(d);
            }
            d <= atol + rtol * y.abs()
        }
        _ => false,
    }
}

pub fn diff_csv(old: &[u8], new: &[u8], atol: f64, rtol: f64) -> Result<CsvDiff> {
    let (old, new) = (records(old)?, records(new)?);
    let mut d = CsvDiff {
        header_changed: old.first() != new.first(),
        old_rows: old.len().saturating_sub(1),
        new_rows: new.len().saturating_sub(1),
        ..CsvDiff::default()
    };
    for i in 0..d.old_rows.max(d.new_rows) {
        let same = match (old.get(i + 1), new.get(i + 1)) {
            (Some(a), Some(b)) => {
                a.len() == b.len()
                    && a.iter()
                        .zip(b.iter())
                        .all(|(x, y)| cell_close(y, x, atol, rtol, &mut d.max_abs_diff))
            }
            _ => false,
        };
        if !same {
            d.changed_rows.push(i);
        }
    }
    Ok(d)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    /// Digest matches.
    Exact,
    /// Digest differs but every cell is within tolerance of the stored CSV.
    WithinTolerance(CsvDiff),
    Mismatch {
        digest: String,
        diff: Option<CsvDiff>,
    },
}

impl Outcome {
    pub fn passed(&self) -> bool {
        !matches!(self, Outcome::Mismatch { .. })
    }
}

pub fn check_case(case: &GoldenCase) -> Result<Outcome> {
    let bytes = render(case)?;
    let digest = sha256_hex(&bytes);
    if digest == case.expected_digest {
        return Ok(Outcome::Exact);
    }
    let Ok(stored) = std::fs::read(&case.csv_path) else {
        return Ok(Outcome::Mismatch { digest, diff: None });
    };
    let (atol, rtol) = case.tolerance.bounds();
    let diff = diff_csv(&stored, &bytes, atol, rtol)?;
    if diff.is_clean() {
        Ok(Outcome::WithinTolerance(diff))
    } else {
        Ok(Outcome::Mismatch {
            digest,
            diff: Some(diff),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GoldenUpdate {
    pub name: String,
    pub old_digest: String,
    pub new_digest: String,
    pub diff: Option<CsvDiff>,
}

impl GoldenUpdate {
    pub fn changed(&self) -> bool {
        self.old_digest != self.new_digest
    }
}

/// True when the maintainer flag or `VFLUX_MAINTAINER=1` is set.
pub fn maintainer_mode(flag: bool) -> bool {
    flag || std::env::var(MAINTAINER_ENV).is_ok_and(|v| v == "1")
}

/// Re-renders the selected cases (all when `only` is `None`), rewrites their
/// CSVs and the manifest digests. Refused outside maintainer mode.
pub fn regenerate_golden(
    manifest: &mut Manifest,
    only: Option<&str>,
    maintainer: bool,
) -> Result<Vec<GoldenUpdate>> {
    if !maintainer {
        return Err(CliError::Golden(format!(
            "regeneration needs maintainer mode (--maintainer or {MAINTAINER_ENV}=1)"
        )));
    }
    if let Some(name) = only {
        if !manifest.cases.iter().any(|c| c.name == name) {
            return Err(CliError::Golden(format!("no case named `{name}`")));
        }
    }
    let mut updates = Vec::new();
    for (i, case) in manifest.cases.iter_mut().enumerate() {
        if only.is_some_and(|n| n != case.name) {
            continue;
        }
        let bytes = render(case)?;
        let new_digest = sha256_hex(&bytes);
        let diff = match std::fs::read(&case.csv_path) {
            Ok(old) => Some(diff_csv(&old, &bytes, 0.0, 0.0)?),
            Err(_) => None,
        };
        std::fs::write(&case.csv_path, &bytes)
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", case.csv_path.display())))?;
        updates.push(GoldenUpdate {
            name: case.name.clone(),
            old_digest: case.expected_digest.clone(),
            new_digest: new_digest.clone(),
            diff,
        });
        case.expected_digest = new_digest.clone();
        manifest.raw.cases[i].digest = new_digest;
    }
    let text = toml::to_string(&manifest.raw)
        .map_err(|e| CliError::Golden(format!("cannot encode manifest: {e}")))?;
    std::fs::write(&manifest.path, text)
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", manifest.path.display())))?;
    Ok(updates)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diff_flags_rows_beyond_tolerance() {
        let old = b"a,b\n1.0,x\n2.0,y\n";
        let new = b"a,b\n1.0000000000001,x\n2.1,y\n3.0,z\n";
        let d = diff_csv(old, new, 1e-12, 0.0).unwrap();
        assert!(!d.header_changed);
        assert_eq!(d.changed_rows, vec![1, 2]);
        assert_eq!((d.old_rows, d.new_rows), (2, 3));
        assert!(diff_csv(old, old, 0.0, 0.0).unwrap().is_clean());
        let text_change = diff_csv(b"a\nx\n", b"a\ny\n", 1.0, 1.0).unwrap();
        assert_eq!(text_change.changed_rows, vec![0]);
    }

    #[test]
    fn regeneration_is_refused_without_maintainer_flag() {
        let mut m = Manifest {
            path: PathBuf::from("unused.toml"),
            cases: Vec::new(),
            raw: RawManifest {
                schema: MANIFEST_SCHEMA.into(),
                cases: Vec::new(),
            },
        };
        let err = regenerate_golden(&mut m, None, false).unwrap_err();
        assert!(err.to_string().contains("maintainer"));
    }
}
