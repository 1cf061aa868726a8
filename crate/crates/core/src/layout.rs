//! Arranging objects on a 2-D grid by matching their features to cell
//! coordinates.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::Image;
use crate::matcher::{run_match, MatchConfig, MatchResult, ModelSpec};
use crate::permutation::Permutation;
use crate::sample::{sq_dist, SampleSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FrameSource {
    Rect { rows: usize, cols: usize },
    /// Bounding box of a text mask.
    Mask { rows: usize, cols: usize },
}

/// Occupied grid cells `(row, col)` in row-major order, unit spacing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridFrame {
    cells: Vec<(usize, usize)>,
    source: FrameSource,
}

impl GridFrame {
    pub fn cells(&self) -> &[(usize, usize)] {
        &self.cells
    }

    pub fn source(&self) -> FrameSource {
        self.source
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// `(rows, cols)` of the enclosing box.
    pub fn bounds(&self) -> (usize, usize) {
        match self.source {
            FrameSource::Rect { rows, cols } | FrameSource::Mask { rows, cols } => (rows, cols),
        }
    }

    /// Cell centers as 2-D samples `(row, col)`.
    pub fn coordinates(&self) -> SampleSet {
        let data = self.cells.iter().flat_map(|&(r, c)| [r as f64, c as f64]).collect();
        SampleSet::new(data, self.cells.len(), 2).expect("frames are never empty")
    }

    /// Unordered pairs of occupied cells that share an edge, each listed once
    /// as `(a, b)` with `a < b`.
    pub fn neighbor_pairs(&self) -> Vec<(usize, usize)> {
        let (rows, cols) = self.bounds();
        let mut index = vec![usize::MAX; rows * cols];
        for (k, &(r, c)) in self.cells.iter().enumerate() {
            index[r * cols + c] = k;
        }
        let mut pairs = Vec::new();
        for (k, &(r, c)) in self.cells.iter().enumerate() {
            if c + 1 < cols && index[r * cols + c + 1] != usize::MAX {
                pairs.push((k, index[r * cols + c + 1]));
            }
            if r + 1 < rows && index[(r + 1) * cols + c] != usize::MAX {
                pairs.push((k, index[(r + 1) * cols + c]));
            }
        }
        pairs
    }
}

pub fn rect_frame(rows: usize, cols: usize) -> Result<GridFrame> {
    if rows == 0 || cols == 0 {
        return Err(Error::invalid(format!("frame dimensions must be >= 1, got {rows}x{cols}")));
    }
    let cells = (0..rows).flat_map(|r| (0..cols).map(move |c| (r, c))).collect();
    Ok(GridFrame {
        cells,
        source: FrameSource::Rect { rows, cols },
    })
}

/// Parses a block of `#` (occupied) and `.` (empty) characters. Trailing
/// blank lines are ignored.
pub fn mask_frame(text: &str) -> Result<GridFrame> {
    let mut lines: Vec<&str> = text.lines().map(|l| l.trim_end_matches('\r')).collect();
    while lines.last().is_some_and(|l| l.trim().is_empty()) {
        lines.pop();
    }
    let width = lines.first().map_or(0, |l| l.chars().count());
    let mut cells = Vec::new();
    for (r, line) in lines.iter().enumerate() {
        if line.chars().count() != width {
            return Err(Error::invalid(format!(
                "mask line {} has {} characters, expected {width}",
                r + 1,
                line.chars().count()
            )));
        }
        for (c, ch) in line.chars().enumerate() {
            match ch {
                '#' => cells.push((r, c)),
                '.' => {}
                other => {
                    return Err(Error::invalid(format!(
                        "mask line {} column {}: illegal character {other:?}",
                        r + 1,
                        c + 1
                    )))
                }
            }
        }
    }
    if cells.is_empty() {
        return Err(Error::invalid("empty frame: the mask has no '#' cells"));
    }
    Ok(GridFrame {
        cells,
        source: FrameSource::Mask {
            rows: lines.len(),
            cols: width,
        },
    })
}

/// Mean feature distance over 4-neighbor cell pairs; `cell_to_feature[k]` is
/// the object placed in cell `k`. Zero when the frame has no adjacent cells.
pub fn locality(features: &SampleSet, frame: &GridFrame, cell_to_feature: &[usize]) -> Result<f64> {
    check_counts(features, frame)?;
    if cell_to_feature.len() != frame.len() {
        return Err(Error::SizeMismatch {
            expected: frame.len(),
            actual: cell_to_feature.len(),
        });
    }
    let pairs = frame.neighbor_pairs();
    if pairs.is_empty() {
        return Ok(0.0);
    }
    let total: f64 = pairs
        .iter()
        .map(|&(a, b)| sq_dist(features.row(cell_to_feature[a]), features.row(cell_to_feature[b])).sqrt())
        .sum();
    Ok(total / pairs.len() as f64)
}

fn check_counts(features: &SampleSet, frame: &GridFrame) -> Result<()> {
    if features.len() != frame.len() {
        return Err(Error::invalid(format!(
            "frame size must equal image count ({} cells, {} images)",
            frame.len(),
            features.len()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    /// Object index placed in each frame cell, in frame order.
    pub cell_to_feature: Vec<usize>,
    pub locality: f64,
    /// Absent for the trivial single-cell frame.
    pub matching: Option<MatchResult>,
}

/// Matches features (first domain) to frame coordinates (second domain).
pub fn summarize(features: &SampleSet, frame: &GridFrame, spec: &ModelSpec, cfg: &MatchConfig) -> Result<Layout> {
    check_counts(features, frame)?;
    if frame.len() == 1 {
        return Ok(Layout {
            cell_to_feature: vec![0],
            locality: 0.0,
            matching: None,
        });
    }
    let m = run_match(features, &frame.coordinates(), spec, cfg)?;
    let cell_to_feature = m.permutation.inverse().into_vec();
    Ok(Layout {
        locality: locality(features, frame, &cell_to_feature)?,
        cell_to_feature,
        matching: Some(m),
    })
}

/// Locality of `trials` uniformly random placements.
pub fn random_baseline(features: &SampleSet, frame: &GridFrame, trials: usize, seed: u64) -> Result<Vec<f64>> {
    check_counts(features, frame)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..trials)
        .map(|_| {
            let p = Permutation::random(frame.len(), &mut rng);
            locality(features, frame, p.as_slice())
        })
        .collect()
}

/// Tiles `images[cell_to_feature[k]]` into cell `k`; unoccupied cells are
/// white. All images must share one size.
pub fn montage(images: &[Image], frame: &GridFrame, cell_to_feature: &[usize]) -> Result<Image> {
    if images.len() != frame.len() || cell_to_feature.len() != frame.len() {
        return Err(Error::invalid(format!(
            "frame size must equal image count ({} cells, {} images)",
            frame.len(),
            images.len()
        )));
    }
    let (h, w) = (images[0].height, images[0].width);
    if images.iter().any(|im| im.height != h || im.width != w) {
        return Err(Error::invalid("montage images must all have the same size"));
    }
    let (rows, cols) = frame.bounds();
    let mut out = Image::filled(cols * w, rows * h, 3, 1.0)?;
    for (k, &(r, c)) in frame.cells().iter().enumerate() {
        let tile = images[cell_to_feature[k]].to_rgb();
        for y in 0..h {
            for x in 0..w {
                out.pixel_mut(r * h + y, c * w + x).copy_from_slice(tile.pixel(y, x));
            }
        }
    }
    Ok(out)
}
