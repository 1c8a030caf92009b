//! Near-field line-of-sight channel synthesis.
//!
//! Every link is a unit-modulus phasor `exp(-j 2π d / λ)` scaled by a
//! constant path-loss amplitude, where `d` is the exact Euclidean distance.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Axis, GridDims};

pub type Point3 = [f64; 3];

fn distance(a: Point3, b: Point3) -> f64 {
    let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
}

/// Converts a power in dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Positions of the transmitter, receive antennas and IRS elements.
#[derive(Debug, Clone, PartialEq)]
pub struct Geometry {
    pub dims: GridDims,
    pub tx_pos: Point3,
    pub rx_antenna_pos: Vec<Point3>,
    /// One position per IRS element, row-major.
    pub irs_element_pos: Vec<Point3>,
    pub wavelength: f64,
}

/// Parameters of the default chamber layout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Layout {
    pub wavelength: f64,
    pub tx_pos: Point3,
    pub rx_center: Point3,
    /// IRS element pitch in wavelengths.
    pub irs_pitch: f64,
    /// Receive-array pitch in wavelengths.
    pub rx_pitch: f64,
}

impl Default for Layout {
    fn default() -> Self {
        Self {
            wavelength: 0.1,
            tx_pos: [1.5, -1.0, 0.0],
            rx_center: [1.5, 1.0, 0.0],
            irs_pitch: 0.5,
            rx_pitch: 0.5,
        }
    }
}

impl Geometry {
    /// IRS in the y-z plane centered at the origin (columns along y, rows
    /// along z) and a uniform linear receive array along y.
    pub fn from_layout(dims: GridDims, antennas: usize, layout: &Layout) -> Result<Self> {
        let lambda = layout.wavelength;
        let pitch = layout.irs_pitch * lambda;
        let ch = (dims.n_h() as f64 + 1.0) / 2.0;
        let cv = (dims.n_v() as f64 + 1.0) / 2.0;
        let irs_element_pos = dims
            .elements()
            .map(|(c, r)| [0.0, (c as f64 - ch) * pitch, (r as f64 - cv) * pitch])
            .collect();
        let cm = (antennas as f64 + 1.0) / 2.0;
        let rx_antenna_pos = (1..=antennas)
            .map(|m| {
                let [x, y, z] = layout.rx_center;
                [x, y + (m as f64 - cm) * layout.rx_pitch * lambda, z]
            })
            .collect();
        let geom = Self {
            dims,
            tx_pos: layout.tx_pos,
            rx_antenna_pos,
            irs_element_pos,
            wavelength: lambda,
        };
        geom.validate()?;
        Ok(geom)
    }

    pub fn antennas(&self) -> usize {
        self.rx_antenna_pos.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.rx_antenna_pos.is_empty() {
            return Err(Error::DegenerateGeometry("no receive antennas".into()));
        }
        if !(self.wavelength > 0.0 && self.wavelength.is_finite()) {
            return Err(Error::DegenerateGeometry(format!("wavelength {}", self.wavelength)));
        }
        if self.irs_element_pos.len() != self.dims.len() {
            return Err(Error::Dimension {
                expected: self.dims.len(),
                got: self.irs_element_pos.len(),
            });
        }
        let check = |a: Point3, b: Point3, what: &str| {
            let d = distance(a, b);
            if d > 0.0 && d.is_finite() {
                Ok(())
            } else {
                Err(Error::DegenerateGeometry(format!("{what} distance is {d}")))
            }
        };
        for &rx in &self.rx_antenna_pos {
            check(self.tx_pos, rx, "Tx-Rx")?;
        }
        for &el in &self.irs_element_pos {
            check(self.tx_pos, el, "Tx-IRS")?;
            for &rx in &self.rx_antenna_pos {
                check(el, rx, "IRS-Rx")?;
            }
        }
        Ok(())
    }
}

/// Path-loss amplitudes of the three links.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathLoss {
    pub tx_rx: f64,
    pub irs_rx: f64,
    pub tx_irs: f64,
}

impl Default for PathLoss {
    fn default() -> Self {
        Self {
            tx_rx: 1e-3,
            irs_rx: 1e-2,
            tx_irs: 1e-2,
        }
    }
}

/// The radio environment seen by the receiver.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    dims: GridDims,
    antennas: usize,
    h: Vec<Complex64>,
    /// Tx → element coefficient per element.
    u: Vec<Complex64>,
    /// Element → Rx vectors, element-major `[offset * M + m]`.
    r: Vec<Complex64>,
    /// Cascaded channels `u * r`, same layout as `r`.
    g: Vec<Complex64>,
    noise_power: f64,
    col_sums: Vec<Complex64>,
    row_sums: Vec<Complex64>,
    amplitude_scale: f64,
}

impl ChannelSet {
    /// Builds a channel set from explicit direct and cascaded channels. `g` is
    /// element-major with `antennas` entries per element. `r` is taken as `g`
    /// and `u` as 1.
    pub fn from_cascades(
        dims: GridDims,
        h: Vec<Complex64>,
        g: Vec<Complex64>,
        noise_power: f64,
    ) -> Result<Self> {
        let m = h.len();
        if m == 0 {
            return Err(Error::DegenerateGeometry("no receive antennas".into()));
        }
        if g.len() != dims.len() * m {
            return Err(Error::Dimension {
                expected: dims.len() * m,
                got: g.len(),
            });
        }
        Self::assemble(dims, h, vec![Complex64::new(1.0, 0.0); dims.len()], g.clone(), g, noise_power)
    }

    fn assemble(
        dims: GridDims,
        h: Vec<Complex64>,
        u: Vec<Complex64>,
        r: Vec<Complex64>,
        g: Vec<Complex64>,
        noise_power: f64,
    ) -> Result<Self> {
        if !(noise_power >= 0.0 && noise_power.is_finite()) {
            return Err(Error::Parameter(format!("noise power {noise_power}")));
        }
        let m = h.len();
        let mut col_sums = vec![Complex64::default(); dims.n_h() * m];
        let mut row_sums = vec![Complex64::default(); dims.n_v() * m];
        for (offset, (c, r_)) in dims.elements().enumerate() {
            for k in 0..m {
                let v = g[offset * m + k];
                col_sums[(c - 1) * m + k] += v;
                row_sums[(r_ - 1) * m + k] += v;
            }
        }
        let norm = |v: &[Complex64]| v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let amplitude_scale = norm(&h) + g.chunks(m).map(norm).sum::<f64>();
        Ok(Self {
            dims,
            antennas: m,
            h,
            u,
            r,
            g,
            noise_power,
            col_sums,
            row_sums,
            amplitude_scale,
        })
    }

    pub fn dims(&self) -> GridDims {
        self.dims
    }

    /// Number of receive antennas `M`.
    pub fn antennas(&self) -> usize {
        self.antennas
    }

    /// Direct Tx → Rx channel.
    pub fn h(&self) -> &[Complex64] {
        &self.h
    }

    /// Cascaded channel of the element at storage `offset`.
    pub fn g(&self, offset: usize) -> &[Complex64] {
        &self.g[offset * self.antennas..(offset + 1) * self.antennas]
    }

    pub fn u(&self, offset: usize) -> Complex64 {
        self.u[offset]
    }

    pub fn r(&self, offset: usize) -> &[Complex64] {
        &self.r[offset * self.antennas..(offset + 1) * self.antennas]
    }

    /// Receiver noise power σ² in watts. Zero means noiseless.
    pub fn noise_power(&self) -> f64 {
        self.noise_power
    }

    pub fn with_noise_power(mut self, noise_power: f64) -> Result<Self> {
        if !(noise_power >= 0.0 && noise_power.is_finite()) {
            return Err(Error::Parameter(format!("noise power {noise_power}")));
        }
        self.noise_power = noise_power;
        Ok(self)
    }

    /// Sum of cascaded channels over one full line (column for
    /// `Horizontal`, row for `Vertical`), 1-based.
    pub fn line_sum(&self, axis: Axis, index: usize) -> &[Complex64] {
        let m = self.antennas;
        let sums = match axis {
            Axis::Horizontal => &self.col_sums,
            Axis::Vertical => &self.row_sums,
        };
        &sums[(index - 1) * m..index * m]
    }

    /// Sum of cascaded channels over every element whose `axis` coordinate
    /// satisfies `select`.
    pub fn region_sum(&self, axis: Axis, select: impl Fn(usize) -> bool) -> Vec<Complex64> {
        let mut acc = vec![Complex64::default(); self.antennas];
        for i in (1..=self.dims.extent(axis)).filter(|&i| select(i)) {
            for (a, v) in acc.iter_mut().zip(self.line_sum(axis, i)) {
                *a += v;
            }
        }
        acc
    }

    /// Sum of every element's cascaded channel.
    pub fn total_cascade(&self) -> Vec<Complex64> {
        self.region_sum(Axis::Horizontal, |_| true)
    }

    /// `‖h‖ + Σ_n ‖g_n‖`, an upper bound on the received amplitude per unit pilot.
    pub fn amplitude_scale(&self) -> f64 {
        self.amplitude_scale
    }
}

/// Near-field LOS channels for `geom` with constant path-loss amplitudes.
pub fn synthesize_channels(geom: &Geometry, loss: PathLoss, noise_power: f64) -> Result<ChannelSet> {
    geom.validate()?;
    for (name, v) in [("Tx-Rx", loss.tx_rx), ("IRS-Rx", loss.irs_rx), ("Tx-IRS", loss.tx_irs)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::Parameter(format!("{name} path loss {v}")));
        }
    }
    if !(noise_power > 0.0 && noise_power.is_finite()) {
        return Err(Error::Parameter(format!("noise power {noise_power}")));
    }
    let lambda = geom.wavelength;
    let link = |gain: f64, a: Point3, b: Point3| Complex64::from_polar(gain, -TAU * distance(a, b) / lambda);

    let h: Vec<Complex64> = geom
        .rx_antenna_pos
        .iter()
        .map(|&rx| link(loss.tx_rx, geom.tx_pos, rx))
        .collect();
    let u: Vec<Complex64> = geom
        .irs_element_pos
        .iter()
        .map(|&el| link(loss.tx_irs, geom.tx_pos, el))
        .collect();
    let r: Vec<Complex64> = geom
        .irs_element_pos
        .iter()
        .flat_map(|&el| geom.rx_antenna_pos.iter().map(move |&rx| link(loss.irs_rx, el, rx)))
        .collect();
    let m = geom.antennas();
    let g = r
        .iter()
        .enumerate()
        .map(|(i, rv)| u[i / m] * rv)
        .collect();
    ChannelSet::assemble(geom.dims, h, u, r, g, noise_power)
}
