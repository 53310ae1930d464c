//! Flat `key = value` configuration files.
//!
//! Keys are the field names of [`ReconstructionParams`] and [`PerturbSpec`]
//! plus `threshold` for evaluation. Blank lines and lines starting with `#`
//! are ignored; anything after a `#` on a value line is a comment. Keys not
//! present keep their defaults.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::metrics::DEFAULT_MATCH_THRESHOLD;
use crate::reconstruct::ReconstructionParams;
use crate::synth::PerturbSpec;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Config {
    pub params: ReconstructionParams,
    pub perturb: PerturbSpec,
    /// Corner match threshold for evaluation.
    pub threshold: f64,
}

impl Default for Config {
    fn default() -> Self {
        Self { params: ReconstructionParams::default(), perturb: PerturbSpec::default(), threshold: DEFAULT_MATCH_THRESHOLD }
    }
}

fn parse_value<T: std::str::FromStr>(value: &str, line: usize, key: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Config { line, message: format!("invalid value `{value}` for `{key}`") })
}

fn parse_bool(value: &str, line: usize, key: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config { line, message: format!("invalid boolean `{value}` for `{key}`") }),
    }
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut config = Self::default();
        let mut seen = HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(Error::Config { line, message: format!("expected `key = value`, got `{content}`") });
            };
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(Error::Config { line, message: format!("duplicate key `{key}`") });
            }
            config.set(key, value, line)?;
        }
        config.params.validate().map_err(|e| Error::Config { line: 0, message: e.to_string() })?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    fn set(&mut self, key: &str, value: &str, line: usize) -> Result<()> {
        let p = &mut self.params;
        match key {
            "k" => p.k = parse_value(value, line, key)?,
            "nms_radius" => p.nms_radius = parse_value(value, line, key)?,
            "corner_threshold" => p.corner_threshold = parse_value(value, line, key)?,
            "wire_scale_threshold" => p.wire_scale_threshold = parse_value(value, line, key)?,
            "max_straightness_deviation" => p.max_straightness_deviation = parse_value(value, line, key)?,
            "xy_epsilon" => p.xy_epsilon = parse_value(value, line, key)?,
            "exclude_boundary_edges" => p.exclude_boundary_edges = parse_bool(value, line, key)?,
            "corner_method" => {
                p.corner_method = value.parse().map_err(|e: Error| Error::Config { line, message: e.to_string() })?
            }
            "wire_method" => {
                p.wire_method = value.parse().map_err(|e: Error| Error::Config { line, message: e.to_string() })?
            }
            "plane_tolerance" => p.plane_tolerance = parse_value(value, line, key)?,
            "min_region_area" => p.min_region_area = parse_value(value, line, key)?,
            "long_edge_factor" => p.long_edge_factor = parse_value(value, line, key)?,
            "simplify_tolerance" => p.simplify_tolerance = parse_value(value, line, key)?,
            "crease_distance" => p.crease_distance = parse_value(value, line, key)?,
            "min_side_length" => p.min_side_length = parse_value(value, line, key)?,
            "max_corner_shift" => p.max_corner_shift = parse_value(value, line, key)?,
            "corner_merge_radius" => p.corner_merge_radius = parse_value(value, line, key)?,
            "sparsity_fraction" => self.perturb.sparsity_fraction = parse_value(value, line, key)?,
            "noise_sigma" => self.perturb.noise_sigma = parse_value(value, line, key)?,
            "seed" => self.perturb.seed = parse_value(value, line, key)?,
            "threshold" => self.threshold = parse_value(value, line, key)?,
            _ => return Err(Error::Config { line, message: format!("unknown key `{key}`") }),
        }
        Ok(())
    }

    /// Serializes every key, so `parse(to_text(c)) == c`.
    pub fn to_text(&self) -> String {
        let p = &self.params;
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        put("corner_method", p.corner_method.name().into());
        put("wire_method", p.wire_method.name().into());
        put("k", p.k.to_string());
        put("nms_radius", p.nms_radius.to_string());
        put("corner_threshold", p.corner_threshold.to_string());
        put("wire_scale_threshold", p.wire_scale_threshold.to_string());
        put("max_straightness_deviation", p.max_straightness_deviation.to_string());
        put("xy_epsilon", p.xy_epsilon.to_string());
        put("exclude_boundary_edges", p.exclude_boundary_edges.to_string());
        put("plane_tolerance", p.plane_tolerance.to_string());
        put("min_region_area", p.min_region_area.to_string());
        put("long_edge_factor", p.long_edge_factor.to_string());
        put("simplify_tolerance", p.simplify_tolerance.to_string());
        put("crease_distance", p.crease_distance.to_string());
        put("min_side_length", p.min_side_length.to_string());
        put("max_corner_shift", p.max_corner_shift.to_string());
        put("corner_merge_radius", p.corner_merge_radius.to_string());
        put("sparsity_fraction", self.perturb.sparsity_fraction.to_string());
        put("noise_sigma", self.perturb.noise_sigma.to_string());
        put("seed", self.perturb.seed.to_string());
        put("threshold", self.threshold.to_string());
        out
    }
}
