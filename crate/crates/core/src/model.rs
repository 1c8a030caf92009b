//! IRS grid, clustered-failure ground truth and realized reflecting coefficients.
//!
//! Elements are addressed externally by 1-based `(col, row)` pairs, where
//! `col` runs over `1..=n_h` and `row` over `1..=n_v`. Storage is row-major.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Grid axis. `Horizontal` indexes columns (`n_h`), `Vertical` indexes rows (`n_v`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Horizontal,
    Vertical,
}

impl Axis {
    pub const BOTH: [Axis; 2] = [Axis::Horizontal, Axis::Vertical];
}

/// One of the four rectangle boundaries being estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Boundary {
    HMin,
    HMax,
    VMin,
    VMax,
}

impl Boundary {
    pub const ALL: [Boundary; 4] = [Boundary::HMin, Boundary::HMax, Boundary::VMin, Boundary::VMax];

    pub fn axis(self) -> Axis {
        match self {
            Boundary::HMin | Boundary::HMax => Axis::Horizontal,
            Boundary::VMin | Boundary::VMax => Axis::Vertical,
        }
    }

    /// `true` for the upper boundaries `h_max`, `v_max`.
    pub fn is_upper(self) -> bool {
        matches!(self, Boundary::HMax | Boundary::VMax)
    }

    pub fn of(self, rect: &DefectRect) -> usize {
        match self {
            Boundary::HMin => rect.h_min,
            Boundary::HMax => rect.h_max,
            Boundary::VMin => rect.v_min,
            Boundary::VMax => rect.v_max,
        }
    }
}

/// Size of the IRS grid. Both extents are powers of two.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridDims {
    n_h: usize,
    n_v: usize,
}

impl GridDims {
    pub fn new(n_h: usize, n_v: usize) -> Result<Self> {
        for n in [n_h, n_v] {
            if n == 0 || !n.is_power_of_two() {
                return Err(Error::NotPowerOfTwo(n));
            }
        }
        Ok(Self { n_h, n_v })
    }

    /// Number of columns.
    pub fn n_h(&self) -> usize {
        self.n_h
    }

    /// Number of rows.
    pub fn n_v(&self) -> usize {
        self.n_v
    }

    /// Total number of elements.
    pub fn len(&self) -> usize {
        self.n_h * self.n_v
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn extent(&self, axis: Axis) -> usize {
        match axis {
            Axis::Horizontal => self.n_h,
            Axis::Vertical => self.n_v,
        }
    }

    pub fn contains(&self, col: usize, row: usize) -> bool {
        (1..=self.n_h).contains(&col) && (1..=self.n_v).contains(&row)
    }

    /// Row-major storage offset of a 1-based element index.
    pub fn offset(&self, col: usize, row: usize) -> Result<usize> {
        if !self.contains(col, row) {
            return Err(Error::IndexOutOfRange {
                col,
                row,
                n_h: self.n_h,
                n_v: self.n_v,
            });
        }
        Ok((row - 1) * self.n_h + (col - 1))
    }

    /// Inverse of [`GridDims::offset`].
    pub fn element(&self, offset: usize) -> (usize, usize) {
        (offset % self.n_h + 1, offset / self.n_h + 1)
    }

    /// Coordinate of `(col, row)` along `axis`.
    pub fn coord(axis: Axis, col: usize, row: usize) -> usize {
        match axis {
            Axis::Horizontal => col,
            Axis::Vertical => row,
        }
    }

    /// All elements in storage order.
    pub fn elements(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.len()).map(|o| self.element(o))
    }
}

/// Axis-aligned rectangle of defective elements, inclusive 1-based bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DefectRect {
    pub h_min: usize,
    pub h_max: usize,
    pub v_min: usize,
    pub v_max: usize,
}

impl DefectRect {
    pub fn new(dims: GridDims, h_min: usize, h_max: usize, v_min: usize, v_max: usize) -> Result<Self> {
        let rect = Self {
            h_min,
            h_max,
            v_min,
            v_max,
        };
        rect.validate(dims)?;
        Ok(rect)
    }

    pub fn validate(&self, dims: GridDims) -> Result<()> {
        let ok_h = 1 <= self.h_min && self.h_min <= self.h_max && self.h_max <= dims.n_h();
        let ok_v = 1 <= self.v_min && self.v_min <= self.v_max && self.v_max <= dims.n_v();
        if ok_h && ok_v {
            Ok(())
        } else {
            Err(Error::InvalidRect(format!("{self:?} on {}x{} grid", dims.n_h(), dims.n_v())))
        }
    }

    pub fn contains(&self, col: usize, row: usize) -> bool {
        (self.h_min..=self.h_max).contains(&col) && (self.v_min..=self.v_max).contains(&row)
    }

    /// `(min, max)` along `axis`.
    pub fn bounds(&self, axis: Axis) -> (usize, usize) {
        match axis {
            Axis::Horizontal => (self.h_min, self.h_max),
            Axis::Vertical => (self.v_min, self.v_max),
        }
    }

    pub fn with_bounds(axis_bounds: [(usize, usize); 2]) -> Self {
        let [(h_min, h_max), (v_min, v_max)] = axis_bounds;
        Self {
            h_min,
            h_max,
            v_min,
            v_max,
        }
    }

    pub fn area(&self) -> usize {
        (self.h_max - self.h_min + 1) * (self.v_max - self.v_min + 1)
    }

    /// Every valid rectangle on `dims`, in lexicographic bound order.
    pub fn enumerate(dims: GridDims) -> Vec<DefectRect> {
        let mut out = Vec::new();
        for h_min in 1..=dims.n_h() {
            for h_max in h_min..=dims.n_h() {
                for v_min in 1..=dims.n_v() {
                    for v_max in v_min..=dims.n_v() {
                        out.push(DefectRect {
                            h_min,
                            h_max,
                            v_min,
                            v_max,
                        });
                    }
                }
            }
        }
        out
    }
}

/// Ground truth for one simulated IRS: which elements are stuck and at what phase.
#[derive(Debug, Clone, PartialEq)]
pub struct FailureScene {
    dims: GridDims,
    defect: Option<DefectRect>,
    /// Stuck phase per element in storage order; `None` for normal elements.
    stuck: Vec<Option<f64>>,
}

impl FailureScene {
    /// Rectangular cluster. `phases` lists β for the rectangle's elements in
    /// row-major order (column index varies fastest).
    pub fn rectangular(dims: GridDims, defect: DefectRect, phases: &[f64]) -> Result<Self> {
        defect.validate(dims)?;
        if phases.len() != defect.area() {
            return Err(Error::StuckPhaseMismatch(format!(
                "{} phases for {} defective elements",
                phases.len(),
                defect.area()
            )));
        }
        let mut stuck = vec![None; dims.len()];
        let mut it = phases.iter();
        for row in defect.v_min..=defect.v_max {
            for col in defect.h_min..=defect.h_max {
                let beta = *it.next().expect("length checked");
                if !beta.is_finite() {
                    return Err(Error::StuckPhaseMismatch(format!("non-finite phase at ({col}, {row})")));
                }
                stuck[dims.offset(col, row)?] = Some(beta);
            }
        }
        Ok(Self {
            dims,
            defect: Some(defect),
            stuck,
        })
    }

    /// An IRS without any defective element.
    pub fn healthy(dims: GridDims) -> Self {
        Self {
            dims,
            defect: None,
            stuck: vec![None; dims.len()],
        }
    }

    /// Rectangular cluster with every element stuck at the same phase.
    pub fn uniform_stuck(dims: GridDims, defect: DefectRect, beta: f64) -> Result<Self> {
        defect.validate(dims)?;
        Self::rectangular(dims, defect, &vec![beta; defect.area()])
    }

    /// Rectangular cluster with β drawn uniformly on (0, 2π].
    pub fn sample<R: Rng + ?Sized>(dims: GridDims, defect: DefectRect, rng: &mut R) -> Result<Self> {
        defect.validate(dims)?;
        let phases: Vec<f64> = (0..defect.area()).map(|_| sample_stuck_phase(rng)).collect();
        Self::rectangular(dims, defect, &phases)
    }

    /// Free-form defect mask. The diagnosis target becomes the mask's bounding rectangle.
    pub fn from_mask(dims: GridDims, mask: &[bool], phases: &[f64]) -> Result<Self> {
        if mask.len() != dims.len() {
            return Err(Error::Dimension {
                expected: dims.len(),
                got: mask.len(),
            });
        }
        let defect = bounding_rectangle(dims, mask)?;
        let count = mask.iter().filter(|m| **m).count();
        if phases.len() != count {
            return Err(Error::StuckPhaseMismatch(format!(
                "{} phases for {count} masked elements",
                phases.len()
            )));
        }
        let mut it = phases.iter();
        let stuck = mask
            .iter()
            .map(|&m| if m { it.next().copied() } else { None })
            .collect();
        Ok(Self {
            dims,
            defect: Some(defect),
            stuck,
        })
    }

    pub fn dims(&self) -> GridDims {
        self.dims
    }

    /// The diagnosis target: the defect rectangle (bounding box for masked
    /// scenes), `None` for a healthy IRS.
    pub fn defect(&self) -> Option<DefectRect> {
        self.defect
    }

    /// Stuck phase of the element at storage `offset`, if defective.
    pub fn stuck_phase_at(&self, offset: usize) -> Option<f64> {
        self.stuck[offset]
    }

    pub fn stuck_phase(&self, col: usize, row: usize) -> Result<Option<f64>> {
        Ok(self.stuck[self.dims.offset(col, row)?])
    }

    pub fn is_defective(&self, col: usize, row: usize) -> Result<bool> {
        Ok(self.stuck_phase(col, row)?.is_some())
    }

    /// Per-element defect indicator in storage order.
    pub fn mask(&self) -> Vec<bool> {
        self.stuck.iter().map(Option::is_some).collect()
    }
}

/// Draws β uniformly on (0, 2π].
pub fn sample_stuck_phase<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    TAU * (1.0 - u)
}

/// Commanded phase per element for one time slot, in storage order.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseAssignment {
    phases: Vec<f64>,
}

impl PhaseAssignment {
    pub fn new(dims: GridDims, phases: Vec<f64>) -> Result<Self> {
        if phases.len() != dims.len() {
            return Err(Error::AssignmentLength {
                expected: dims.len(),
                got: phases.len(),
            });
        }
        if let Some(i) = phases.iter().position(|p| !p.is_finite()) {
            return Err(Error::NonFinitePhase(i));
        }
        Ok(Self { phases })
    }

    /// Same phase on every element.
    pub fn uniform(dims: GridDims, phase: f64) -> Self {
        Self {
            phases: vec![phase; dims.len()],
        }
    }

    /// `phase_in` on elements whose coordinate along `axis` satisfies `inside`,
    /// `phase_out` elsewhere.
    pub fn split(
        dims: GridDims,
        axis: Axis,
        inside: impl Fn(usize) -> bool,
        phase_in: f64,
        phase_out: f64,
    ) -> Self {
        let phases = dims
            .elements()
            .map(|(c, r)| {
                if inside(GridDims::coord(axis, c, r)) {
                    phase_in
                } else {
                    phase_out
                }
            })
            .collect();
        Self { phases }
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }
}

/// Reflecting coefficient actually applied by `(col, row)`: the commanded
/// phase for a normal element, the stuck phase for a defective one.
pub fn realized_coefficient(
    scene: &FailureScene,
    assign: &PhaseAssignment,
    col: usize,
    row: usize,
) -> Result<Complex64> {
    let offset = scene.dims.offset(col, row)?;
    if assign.len() != scene.dims.len() {
        return Err(Error::AssignmentLength {
            expected: scene.dims.len(),
            got: assign.len(),
        });
    }
    Ok(coefficient_at(scene, assign, offset))
}

pub(crate) fn coefficient_at(scene: &FailureScene, assign: &PhaseAssignment, offset: usize) -> Complex64 {
    let phase = scene.stuck[offset].unwrap_or(assign.phases[offset]);
    Complex64::cis(phase)
}

/// Indices of all defective elements, sorted by `(col, row)`.
pub fn defective_set(scene: &FailureScene) -> Vec<(usize, usize)> {
    let mut out: Vec<(usize, usize)> = scene
        .stuck
        .iter()
        .enumerate()
        .filter(|(_, s)| s.is_some())
        .map(|(o, _)| scene.dims.element(o))
        .collect();
    out.sort_unstable();
    out
}

/// Smallest rectangle covering every `true` entry of a row-major mask.
pub fn bounding_rectangle(dims: GridDims, mask: &[bool]) -> Result<DefectRect> {
    if mask.len() != dims.len() {
        return Err(Error::Dimension {
            expected: dims.len(),
            got: mask.len(),
        });
    }
    let mut rect: Option<DefectRect> = None;
    for (offset, _) in mask.iter().enumerate().filter(|(_, m)| **m) {
        let (c, r) = dims.element(offset);
        rect = Some(match rect {
            None => DefectRect {
                h_min: c,
                h_max: c,
                v_min: r,
                v_max: r,
            },
            Some(b) => DefectRect {
                h_min: b.h_min.min(c),
                h_max: b.h_max.max(c),
                v_min: b.v_min.min(r),
                v_max: b.v_max.max(r),
            },
        });
    }
    rect.ok_or(Error::NoDefect)
}
