//! In-memory SPCV sequence: frames sharing one normalization transform.

use crate::error::{Error, Result};
use crate::frame::SpcvFrame;
use crate::geom::NormalizationTransform;

/// Per-frame bookkeeping carried alongside the geometry.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameMeta {
    pub source: String,
    pub fit_loss: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpcvContainer {
    rows: usize,
    cols: usize,
    pub transform: NormalizationTransform,
    frames: Vec<SpcvFrame>,
    meta: Vec<FrameMeta>,
}

impl SpcvContainer {
    /// An empty sequence of `rows x cols` frames.
    pub fn new(rows: usize, cols: usize, transform: NormalizationTransform) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::invalid("container dimensions must be positive"));
        }
        Ok(Self {
            rows,
            cols,
            transform,
            frames: Vec::new(),
            meta: Vec::new(),
        })
    }

    pub fn from_frames(frames: Vec<SpcvFrame>, transform: NormalizationTransform) -> Result<Self> {
        let first = frames
            .first()
            .ok_or_else(|| Error::invalid("container needs at least one frame"))?;
        let mut c = Self::new(first.rows(), first.cols(), transform)?;
        for (t, f) in frames.into_iter().enumerate() {
            c.push(
                f,
                FrameMeta {
                    source: format!("frame{t}"),
                    fit_loss: f64::NAN,
                },
            )?;
        }
        Ok(c)
    }

    pub fn push(&mut self, frame: SpcvFrame, meta: FrameMeta) -> Result<()> {
        self.check_dims(&frame)?;
        self.frames.push(frame);
        self.meta.push(meta);
        Ok(())
    }

    pub fn insert(&mut self, at: usize, frame: SpcvFrame, meta: FrameMeta) -> Result<()> {
        self.check_dims(&frame)?;
        if at > self.frames.len() {
            return Err(Error::invalid(format!("insert position {at} past end {}", self.frames.len())));
        }
        self.frames.insert(at, frame);
        self.meta.insert(at, meta);
        Ok(())
    }

    fn check_dims(&self, frame: &SpcvFrame) -> Result<()> {
        if frame.dims() != (self.rows, self.cols) {
            return Err(Error::invalid(format!(
                "frame is {}x{}, container is {}x{}",
                frame.rows(),
                frame.cols(),
                self.rows,
                self.cols
            )));
        }
        Ok(())
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frames(&self) -> &[SpcvFrame] {
        &self.frames
    }

    pub fn frames_mut(&mut self) -> &mut [SpcvFrame] {
        &mut self.frames
    }

    pub fn meta(&self) -> &[FrameMeta] {
        &self.meta
    }
}
