//! Observation containers at the three granularities the models consume:
//! a single series, a series cut into independent segments, and a grid of
//! per-cell segmented series.

use crate::error::{Result, SarError};

/// A complete univariate series of finite observations.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(SarError::EmptySeries);
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(SarError::NonFinite { index });
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// True when every observation equals the first one.
    pub fn is_constant(&self) -> bool {
        let first = self.values[0];
        self.values.iter().all(|&v| v == first)
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

impl TryFrom<Vec<f64>> for TimeSeries {
    type Error = SarError;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

/// Contiguous, non-overlapping segments of one series. Each segment is fit
/// as an independent AR process.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentedSeries {
    segments: Vec<TimeSeries>,
    dropped_tail: Vec<f64>,
}

impl SegmentedSeries {
    pub fn from_segments(segments: Vec<TimeSeries>) -> Result<Self> {
        if segments.is_empty() {
            return Err(SarError::InvalidConfig("at least one segment is required".into()));
        }
        Ok(Self {
            segments,
            dropped_tail: Vec::new(),
        })
    }

    pub fn segments(&self) -> &[TimeSeries] {
        &self.segments
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    /// Observations past the last complete segment.
    pub fn dropped_tail(&self) -> &[f64] {
        &self.dropped_tail
    }

    /// Concatenates the segments and re-appends the dropped tail.
    pub fn concat(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self
            .segments
            .iter()
            .flat_map(|s| s.values().iter().copied())
            .collect();
        out.extend_from_slice(&self.dropped_tail);
        out
    }
}

/// Splits `series` into `⌊T/L⌋` consecutive segments of length `L`.
/// A remainder shorter than `L` is dropped and kept on the result for
/// reporting.
pub fn segment(series: &TimeSeries, segment_length: usize) -> Result<SegmentedSeries> {
    if segment_length == 0 {
        return Err(SarError::InvalidConfig("segment length must be positive".into()));
    }
    let values = series.values();
    let count = values.len() / segment_length;
    if count == 0 {
        return Err(SarError::NoSegments {
            len: values.len(),
            segment_length,
        });
    }
    let segments = values
        .chunks_exact(segment_length)
        .map(|chunk| TimeSeries {
            values: chunk.to_vec(),
        })
        .collect();
    let dropped_tail = values[count * segment_length..].to_vec();
    Ok(SegmentedSeries {
        segments,
        dropped_tail,
    })
}

/// Dimensions of a spatiotemporal grid: `rows × cols` cells, each split into
/// `segments` time segments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridDims {
    pub rows: usize,
    pub cols: usize,
    pub segments: usize,
}

impl GridDims {
    pub fn new(rows: usize, cols: usize, segments: usize) -> Self {
        Self { rows, cols, segments }
    }

    pub fn cell_count(&self) -> usize {
        self.rows * self.cols * self.segments
    }

    /// Linear slot of the 0-based cell `(m, n, gamma)`; `gamma` varies fastest.
    pub fn index(&self, m: usize, n: usize, gamma: usize) -> usize {
        debug_assert!(m < self.rows && n < self.cols && gamma < self.segments);
        (m * self.cols + n) * self.segments + gamma
    }

    /// Inverse of [`GridDims::index`].
    pub fn coords(&self, index: usize) -> (usize, usize, usize) {
        let gamma = index % self.segments;
        let rest = index / self.segments;
        (rest / self.cols, rest % self.cols, gamma)
    }
}

/// Per-cell series over an `M × N` grid and `Γ` segments. Absent cells are
/// masked out of every fit.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSeries {
    dims: GridDims,
    segment_lengths: Vec<usize>,
    cells: Vec<Option<TimeSeries>>,
}

impl GridSeries {
    /// An all-masked grid with the given per-segment lengths.
    pub fn empty(rows: usize, cols: usize, segment_lengths: Vec<usize>) -> Result<Self> {
        if rows == 0 || cols == 0 || segment_lengths.is_empty() {
            return Err(SarError::InvalidConfig("grid dimensions must be positive".into()));
        }
        if segment_lengths.contains(&0) {
            return Err(SarError::InvalidConfig("segment lengths must be positive".into()));
        }
        let dims = GridDims::new(rows, cols, segment_lengths.len());
        Ok(Self {
            dims,
            segment_lengths,
            cells: vec![None; dims.cell_count()],
        })
    }

    /// Stores the series of 0-based cell `(m, n, gamma)`.
    pub fn set_cell(&mut self, m: usize, n: usize, gamma: usize, series: TimeSeries) -> Result<()> {
        let dims = self.dims;
        if m >= dims.rows || n >= dims.cols || gamma >= dims.segments {
            return Err(SarError::InvalidConfig(format!(
                "cell ({}, {}, {}) outside grid {}x{}x{}",
                m + 1,
                n + 1,
                gamma + 1,
                dims.rows,
                dims.cols,
                dims.segments
            )));
        }
        let expected = self.segment_lengths[gamma];
        if series.len() != expected {
            return Err(SarError::InconsistentCell {
                m: m + 1,
                n: n + 1,
                gamma: gamma + 1,
                len: series.len(),
                expected,
            });
        }
        self.cells[dims.index(m, n, gamma)] = Some(series);
        Ok(())
    }

    pub fn dims(&self) -> GridDims {
        self.dims
    }

    pub fn segment_lengths(&self) -> &[usize] {
        &self.segment_lengths
    }

    pub fn cell(&self, m: usize, n: usize, gamma: usize) -> Option<&TimeSeries> {
        self.cells[self.dims.index(m, n, gamma)].as_ref()
    }

    /// All slots in linear order; `None` marks a masked cell.
    pub fn cells(&self) -> &[Option<TimeSeries>] {
        &self.cells
    }

    pub fn unmasked_count(&self) -> usize {
        self.cells.iter().filter(|c| c.is_some()).count()
    }

    /// A 1×1×1 grid holding one series.
    pub fn single(series: TimeSeries) -> Self {
        let len = series.len();
        Self {
            dims: GridDims::new(1, 1, 1),
            segment_lengths: vec![len],
            cells: vec![Some(series)],
        }
    }
}
