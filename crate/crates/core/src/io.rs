//! Plain-text point cloud and wireframe formats, plus the coordinate
//! normalization applied before scoring.
//!
//! Point clouds are read from whitespace-separated `x y z` lines. Wireframes
//! use a subset of Wavefront OBJ: `v x y z` corner records followed by
//! `l i j` segment records with 1-based indices.

use std::collections::HashSet;
use std::io::{BufRead, Write};

use nalgebra::{Point3, Vector3};

use crate::error::{Error, Result};

/// Upper end of the normalized working range; the longest bounding-box
/// extent of a normalized cloud spans `[0, NORMALIZED_EXTENT]`.
pub const NORMALIZED_EXTENT: f64 = 256.0;

/// Ordered list of 3D points.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    pub points: Vec<Point3<f64>>,
}

impl PointCloud {
    /// Builds a cloud, rejecting non-finite coordinates.
    pub fn new(points: Vec<Point3<f64>>) -> Result<Self> {
        if let Some(i) = points.iter().position(|p| !p.coords.iter().all(|c| c.is_finite())) {
            return Err(Error::Contract(format!("point {i} has a non-finite coordinate")));
        }
        Ok(Self { points })
    }

    pub fn from_xyz(coords: &[[f64; 3]]) -> Result<Self> {
        Self::new(coords.iter().map(|c| Point3::new(c[0], c[1], c[2])).collect())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Axis-aligned bounding box as `(min, max)`, or `None` when empty.
    pub fn bounds(&self) -> Option<(Point3<f64>, Point3<f64>)> {
        let first = *self.points.first()?;
        Some(self.points.iter().fold((first, first), |(lo, hi), p| {
            (lo.inf(p), hi.sup(p))
        }))
    }
}

/// Corner positions plus undirected wires between them.
///
/// Wires are stored with the smaller index first, in insertion order, with
/// duplicates removed.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Wireframe {
    pub corners: Vec<Point3<f64>>,
    pub wires: Vec<(usize, usize)>,
}

impl Wireframe {
    /// Validates indices, drops duplicate wires and canonicalizes each pair.
    pub fn new(corners: Vec<Point3<f64>>, wires: Vec<(usize, usize)>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(wires.len());
        let mut canonical = Vec::with_capacity(wires.len());
        for (a, b) in wires {
            if a == b {
                return Err(Error::Contract(format!("wire ({a}, {b}) is a self-loop")));
            }
            if a >= corners.len() || b >= corners.len() {
                return Err(Error::Contract(format!(
                    "wire ({a}, {b}) references a corner outside 0..{}",
                    corners.len()
                )));
            }
            let pair = (a.min(b), a.max(b));
            if seen.insert(pair) {
                canonical.push(pair);
            }
        }
        Ok(Self { corners, wires: canonical })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn wire_length(&self, wire: (usize, usize)) -> f64 {
        (self.corners[wire.0] - self.corners[wire.1]).norm()
    }

    pub fn total_wire_length(&self) -> f64 {
        self.wires.iter().map(|&w| self.wire_length(w)).sum()
    }

    /// Applies `f` to every corner, keeping the wire set.
    pub fn map_corners(&self, f: impl Fn(&Point3<f64>) -> Point3<f64>) -> Self {
        Self {
            corners: self.corners.iter().map(f).collect(),
            wires: self.wires.clone(),
        }
    }
}

/// Uniform scale plus translation: `normalized = (p - offset) * scale`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizationTransform {
    pub scale: f64,
    pub offset: Vector3<f64>,
}

impl NormalizationTransform {
    pub fn identity() -> Self {
        Self { scale: 1.0, offset: Vector3::zeros() }
    }

    pub fn apply(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::from((p.coords - self.offset) * self.scale)
    }

    pub fn invert(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::from(p.coords / self.scale + self.offset)
    }

    pub fn apply_cloud(&self, cloud: &PointCloud) -> PointCloud {
        PointCloud { points: cloud.points.iter().map(|p| self.apply(p)).collect() }
    }

    pub fn apply_wireframe(&self, w: &Wireframe) -> Wireframe {
        w.map_corners(|p| self.apply(p))
    }

    pub fn invert_wireframe(&self, w: &Wireframe) -> Wireframe {
        w.map_corners(|p| self.invert(p))
    }
}

/// Maps the bounding-box minimum to the origin and the longest extent onto
/// `[0, 256]` with one uniform scale factor.
pub fn normalize_to_range(cloud: &PointCloud) -> Result<(PointCloud, NormalizationTransform)> {
    let (lo, hi) = cloud.bounds().ok_or(Error::EmptyInput)?;
    let extent = (hi - lo).max();
    let scale = if extent > 0.0 { NORMALIZED_EXTENT / extent } else { 1.0 };
    let transform = NormalizationTransform { scale, offset: lo.coords };
    Ok((transform.apply_cloud(cloud), transform))
}

fn content_lines<R: BufRead>(reader: R) -> impl Iterator<Item = Result<(usize, String)>> {
    reader.lines().enumerate().filter_map(|(i, line)| match line {
        Err(e) => Some(Err(Error::Io(e))),
        Ok(line) => {
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                None
            } else {
                Some(Ok((i + 1, trimmed.to_string())))
            }
        }
    })
}

fn parse_f64(token: &str, line: usize) -> Result<f64> {
    let value: f64 = token.parse().map_err(|_| Error::Parse {
        line,
        message: format!("'{token}' is not a number"),
    })?;
    if !value.is_finite() {
        return Err(Error::Parse { line, message: format!("'{token}' is not finite") });
    }
    Ok(value)
}

/// Reads one `x y z` point per line. Blank lines and `#` comments are skipped.
pub fn read_xyz<R: BufRead>(reader: R) -> Result<PointCloud> {
    let mut points = Vec::new();
    for entry in content_lines(reader) {
        let (line, text) = entry?;
        let tokens: Vec<&str> = text.split_whitespace().collect();
        if tokens.len() != 3 {
            return Err(Error::Parse {
                line,
                message: format!("expected 3 coordinates, found {}", tokens.len()),
            });
        }
        points.push(Point3::new(
            parse_f64(tokens[0], line)?,
            parse_f64(tokens[1], line)?,
            parse_f64(tokens[2], line)?,
        ));
    }
    if points.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(PointCloud { points })
}

pub fn write_xyz<W: Write>(cloud: &PointCloud, mut writer: W) -> Result<()> {
    for p in &cloud.points {
        writeln!(writer, "{} {} {}", p.x, p.y, p.z)?;
    }
    Ok(())
}

fn parse_obj_index(token: &str, line: usize, corner_count: usize) -> Result<usize> {
    // `l 3/1 4/2` carries texture indices after the slash.
    let head = token.split('/').next().unwrap_or(token);
    let index: usize = head.parse().map_err(|_| Error::Format {
        line,
        message: format!("'{token}' is not a positive vertex index"),
    })?;
    if index == 0 || index > corner_count {
        return Err(Error::Format {
            line,
            message: format!("vertex index {index} out of range 1..={corner_count}"),
        });
    }
    Ok(index - 1)
}

/// Reads `v` and `l` records. Indices are resolved against the corners
/// declared so far, so corners must precede the segments that use them.
pub fn read_obj_wireframe<R: BufRead>(reader: R) -> Result<Wireframe> {
    let mut corners = Vec::new();
    let mut wires = Vec::new();
    for entry in content_lines(reader) {
        let (line, text) = entry?;
        let mut tokens = text.split_whitespace();
        let tag = tokens.next().unwrap_or_default();
        let rest: Vec<&str> = tokens.collect();
        match tag {
            "v" => {
                if rest.len() != 3 && rest.len() != 4 {
                    return Err(Error::Format {
                        line,
                        message: format!("vertex record needs 3 coordinates, found {}", rest.len()),
                    });
                }
                let coord = |t: &str| {
                    parse_f64(t, line).map_err(|_| Error::Format {
                        line,
                        message: format!("'{t}' is not a number"),
                    })
                };
                corners.push(Point3::new(coord(rest[0])?, coord(rest[1])?, coord(rest[2])?));
            }
            "l" => {
                if rest.len() != 2 {
                    return Err(Error::Format {
                        line,
                        message: format!("line record must have exactly 2 indices, found {}", rest.len()),
                    });
                }
                let a = parse_obj_index(rest[0], line, corners.len())?;
                let b = parse_obj_index(rest[1], line, corners.len())?;
                if a == b {
                    return Err(Error::Format { line, message: "segment is a self-loop".into() });
                }
                wires.push((a, b));
            }
            "o" | "g" | "s" => {}
            other => {
                return Err(Error::Format {
                    line,
                    message: format!("unsupported record '{other}'"),
                })
            }
        }
    }
    Wireframe::new(corners, wires)
}

/// Writes all `v` records, then all `l` records, with `\n` endings.
pub fn write_obj_wireframe<W: Write>(wireframe: &Wireframe, mut writer: W) -> Result<()> {
    for c in &wireframe.corners {
        writeln!(writer, "v {} {} {}", c.x, c.y, c.z)?;
    }
    for &(a, b) in &wireframe.wires {
        writeln!(writer, "l {} {}", a + 1, b + 1)?;
    }
    Ok(())
}
