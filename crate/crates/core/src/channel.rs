//! LoS channel synthesis. Each constituent link is held as a rank-one factored
//! channel `(sqrt(alpha)/d) * e^{-j 2 pi d / lambda} * left * right^T`; the
//! element-wise form from exact per-pair distances is built on demand.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geometry::{link_geometry, Axis, Link, LinkGeometry, Scenario, UraLayout};
use crate::{CMatrix, CVector, C64};

const UNIT_MODULUS_TOL: f64 = 1e-12;

/// Propagation direction of an array response relative to the array.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Signal leaves the array: phase `+j 2 pi / lambda * offset`.
    Departure,
    /// Signal impinges on the array: phase `-j 2 pi / lambda * offset`.
    Arrival,
}

impl Direction {
    fn sign(self) -> f64 {
        match self {
            Direction::Departure => 1.0,
            Direction::Arrival => -1.0,
        }
    }
}

/// Response of an `count`-antenna ULA; entry `n` (0-based) is
/// `exp(±j 2 pi / lambda * n * spacing * cos_omega)`.
pub fn ula_response(count: usize, spacing: f64, wavelength: f64, cos_omega: f64, dir: Direction) -> CVector {
    let k = dir.sign() * 2.0 * PI / wavelength;
    CVector::from_fn(count, |n, _| C64::from_polar(1.0, k * n as f64 * spacing * cos_omega))
}

/// Response of a URA in flat element order (`m_a` fastest).
pub fn ura_response(
    layout: UraLayout,
    spacing: f64,
    wavelength: f64,
    cos_a: f64,
    cos_b: f64,
    dir: Direction,
) -> CVector {
    let k = dir.sign() * 2.0 * PI / wavelength;
    CVector::from_fn(layout.total(), |m, _| {
        let m_a = (m % layout.count_a) as f64;
        let m_b = (m / layout.count_a) as f64;
        C64::from_polar(1.0, k * spacing * (m_a * cos_a + m_b * cos_b))
    })
}

/// Rank-one far-field LoS channel.
#[derive(Debug, Clone, PartialEq)]
pub struct FactoredChannel {
    pub path_loss: f64,
    pub ref_phase: C64,
    pub left: CVector,
    pub right: CVector,
}

impl FactoredChannel {
    pub fn gain(&self) -> C64 {
        self.ref_phase * self.path_loss
    }

    pub fn matrix(&self) -> CMatrix {
        (&self.left * self.right.transpose()) * self.gain()
    }
}

fn response_for(s: &Scenario, g: &LinkGeometry, link: Link, axis_side: Side, dir: Direction) -> CVector {
    let cos = |axis| g.angle(link, axis).cos();
    match axis_side {
        Side::Bs => ula_response(s.bs.count, s.antenna_spacing, s.wavelength, cos(Axis::Bs), dir),
        Side::User => ula_response(s.user.count, s.antenna_spacing, s.wavelength, cos(Axis::User), dir),
        Side::Irs1 => ura_response(
            s.irs1.layout,
            s.element_spacing,
            s.wavelength,
            cos(Axis::Irs1A),
            cos(Axis::Irs1B),
            dir,
        ),
        Side::Irs2 => ura_response(
            s.irs2.layout,
            s.element_spacing,
            s.wavelength,
            cos(Axis::Irs2A),
            cos(Axis::Irs2B),
            dir,
        ),
    }
}

#[derive(Clone, Copy)]
enum Side {
    Bs,
    User,
    Irs1,
    Irs2,
}

/// (receiving side, transmitting side) of a link.
fn link_sides(link: Link) -> (Side, Side) {
    match link {
        Link::T1 => (Side::Irs1, Side::Bs),
        Link::T2 => (Side::Irs2, Side::Bs),
        Link::R1 => (Side::User, Side::Irs1),
        Link::R2 => (Side::User, Side::Irs2),
        Link::S => (Side::Irs2, Side::Irs1),
    }
}

pub fn channel_factored(s: &Scenario, link: Link) -> Result<FactoredChannel> {
    let g = link_geometry(s)?;
    Ok(factored_from(s, &g, link))
}

fn factored_from(s: &Scenario, g: &LinkGeometry, link: Link) -> FactoredChannel {
    let d = g.distance(link);
    let (rx, tx) = link_sides(link);
    FactoredChannel {
        path_loss: s.path_gain.sqrt() / d,
        ref_phase: C64::from_polar(1.0, -2.0 * PI * d / s.wavelength),
        left: response_for(s, g, link, rx, Direction::Arrival),
        right: response_for(s, g, link, tx, Direction::Departure),
    }
}

/// Element-wise channel from the exact distance between every physical
/// antenna/element pair. Rows index the receiving array.
pub fn channel_exact(s: &Scenario, link: Link) -> Result<CMatrix> {
    let (rx, tx) = link_sides(link);
    let rx_pos = side_positions(s, rx);
    let tx_pos = side_positions(s, tx);
    let amp = s.path_gain.sqrt();
    let k = -2.0 * PI / s.wavelength;
    let mut h = CMatrix::zeros(rx_pos.len(), tx_pos.len());
    for (i, p) in rx_pos.iter().enumerate() {
        for (j, q) in tx_pos.iter().enumerate() {
            let d = (p - q).norm();
            if d == 0.0 {
                return Err(Error::DegenerateGeometry(format!(
                    "element pair ({}, {}) of link {link:?} coincides",
                    i + 1,
                    j + 1
                )));
            }
            h[(i, j)] = C64::from_polar(amp / d, k * d);
        }
    }
    Ok(h)
}

fn side_positions(s: &Scenario, side: Side) -> Vec<nalgebra::Vector3<f64>> {
    match side {
        Side::Bs => (0..s.bs.count).map(|n| s.bs.antenna_position(n, s.antenna_spacing)).collect(),
        Side::User => (0..s.user.count).map(|n| s.user.antenna_position(n, s.antenna_spacing)).collect(),
        Side::Irs1 => (0..s.irs1.element_count())
            .map(|m| s.irs1.element_position(m, s.element_spacing))
            .collect(),
        Side::Irs2 => (0..s.irs2.element_count())
            .map(|m| s.irs2.element_position(m, s.element_spacing))
            .collect(),
    }
}

/// Element-wise channels of all five links.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactChannels {
    pub t1: CMatrix,
    pub t2: CMatrix,
    pub r1: CMatrix,
    pub r2: CMatrix,
    pub s: CMatrix,
}

/// The five constituent channels. `t_i` is `M_i x N_t`, `r_i` is `N_r x M_i`,
/// `s` is `M_2 x M_1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    pub t1: FactoredChannel,
    pub t2: FactoredChannel,
    pub r1: FactoredChannel,
    pub r2: FactoredChannel,
    pub s: FactoredChannel,
    pub exact: Option<ExactChannels>,
}

impl ChannelSet {
    /// Factored channels only.
    pub fn new(s: &Scenario) -> Result<Self> {
        s.validate()?;
        let g = link_geometry(s)?;
        Ok(ChannelSet {
            t1: factored_from(s, &g, Link::T1),
            t2: factored_from(s, &g, Link::T2),
            r1: factored_from(s, &g, Link::R1),
            r2: factored_from(s, &g, Link::R2),
            s: factored_from(s, &g, Link::S),
            exact: None,
        })
    }

    /// Factored channels plus the element-wise matrices.
    pub fn with_exact(s: &Scenario) -> Result<Self> {
        let mut cs = Self::new(s)?;
        cs.exact = Some(ExactChannels {
            t1: channel_exact(s, Link::T1)?,
            t2: channel_exact(s, Link::T2)?,
            r1: channel_exact(s, Link::R1)?,
            r2: channel_exact(s, Link::R2)?,
            s: channel_exact(s, Link::S)?,
        });
        Ok(cs)
    }

    pub fn get(&self, link: Link) -> &FactoredChannel {
        match link {
            Link::T1 => &self.t1,
            Link::T2 => &self.t2,
            Link::R1 => &self.r1,
            Link::R2 => &self.r2,
            Link::S => &self.s,
        }
    }

    pub fn bs_antennas(&self) -> usize {
        self.t1.right.len()
    }

    pub fn user_antennas(&self) -> usize {
        self.r1.left.len()
    }

    pub fn irs1_elements(&self) -> usize {
        self.t1.left.len()
    }

    pub fn irs2_elements(&self) -> usize {
        self.t2.left.len()
    }

    /// Co-phasing template of IRS 1 scaled by `gamma`:
    /// `gamma * conj(t1L) .* conj(r1R)`.
    pub fn template1(&self, gamma: C64) -> CVector {
        self.t1.left.zip_map(&self.r1.right, |t, r| gamma * (t * r).conj())
    }

    /// Co-phasing template of IRS 2: `gamma * conj(t2L) .* conj(r2R)`.
    pub fn template2(&self, gamma: C64) -> CVector {
        self.t2.left.zip_map(&self.r2.right, |t, r| gamma * (t * r).conj())
    }
}

/// IRS reflection coefficients.
#[derive(Debug, Clone, PartialEq)]
pub enum PhaseConfig {
    /// Free per-element coefficients.
    PerElement { phi1: CVector, phi2: CVector },
    /// Common phase shifts applied over the co-phasing templates.
    Structured { gamma1: C64, gamma2: C64 },
}

impl PhaseConfig {
    pub fn structured(gamma1: C64, gamma2: C64) -> Self {
        PhaseConfig::Structured { gamma1, gamma2 }
    }

    pub fn unit() -> Self {
        Self::structured(C64::new(1.0, 0.0), C64::new(1.0, 0.0))
    }

    /// Checks unit modulus of every coefficient.
    pub fn validate(&self) -> Result<()> {
        let bad = |z: &C64| (z.norm() - 1.0).abs() > UNIT_MODULUS_TOL;
        match self {
            PhaseConfig::PerElement { phi1, phi2 } => {
                if let Some(m) = phi1.iter().position(bad) {
                    return Err(Error::ContractViolation(format!("phi1[{}] is not unit modulus", m + 1)));
                }
                if let Some(m) = phi2.iter().position(bad) {
                    return Err(Error::ContractViolation(format!("phi2[{}] is not unit modulus", m + 1)));
                }
            }
            PhaseConfig::Structured { gamma1, gamma2 } => {
                if bad(gamma1) || bad(gamma2) {
                    return Err(Error::ContractViolation("common phase shift is not unit modulus".into()));
                }
            }
        }
        Ok(())
    }

    /// Explicit per-element coefficient vectors.
    pub fn expand(&self, cs: &ChannelSet) -> (CVector, CVector) {
        match self {
            PhaseConfig::PerElement { phi1, phi2 } => (phi1.clone(), phi2.clone()),
            PhaseConfig::Structured { gamma1, gamma2 } => (cs.template1(*gamma1), cs.template2(*gamma2)),
        }
    }
}

/// Scalar link gains of the two single-reflection links and the
/// double-reflection link, with the exact and parallel-link approximations
/// of the latter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkCoefficients {
    pub a: C64,
    pub b: C64,
    pub c: C64,
    pub c_approx: C64,
}

/// `sum_m x_m * phi_m * y_m`.
fn bilinear(x: &CVector, phi: &CVector, y: &CVector) -> C64 {
    x.iter().zip(phi.iter()).zip(y.iter()).map(|((x, p), y)| x * p * y).sum()
}

fn kappa_a(cs: &ChannelSet) -> C64 {
    cs.r1.gain() * cs.t1.gain()
}

fn kappa_b(cs: &ChannelSet) -> C64 {
    cs.r2.gain() * cs.t2.gain()
}

fn kappa_c(cs: &ChannelSet) -> C64 {
    cs.r2.gain() * cs.s.gain() * cs.t1.gain()
}

pub fn link_coefficients(cs: &ChannelSet, pc: &PhaseConfig) -> LinkCoefficients {
    let (phi1, phi2) = pc.expand(cs);
    let irs1_single = bilinear(&cs.r1.right, &phi1, &cs.t1.left);
    let irs2_single = bilinear(&cs.r2.right, &phi2, &cs.t2.left);
    let c = kappa_c(cs) * bilinear(&cs.r2.right, &phi2, &cs.s.left) * bilinear(&cs.s.right, &phi1, &cs.t1.left);
    LinkCoefficients {
        a: kappa_a(cs) * irs1_single,
        b: kappa_b(cs) * irs2_single,
        c,
        c_approx: kappa_c(cs) * irs2_single * irs1_single,
    }
}

fn compose(cs: &ChannelSet, a: C64, b: C64, c: C64) -> CMatrix {
    let r1 = &cs.r1.left;
    let r2 = &cs.r2.left;
    let t1 = cs.t1.right.transpose();
    let t2 = cs.t2.right.transpose();
    (r1 * &t1) * a + (r2 * t2) * b + (r2 * t1) * c
}

/// End-to-end `N_r x N_t` channel. Per-element phases use the exact
/// double-reflection gain; structured phases use the parallel-link form.
pub fn effective_channel(cs: &ChannelSet, pc: &PhaseConfig) -> CMatrix {
    match pc {
        PhaseConfig::PerElement { .. } => {
            let k = link_coefficients(cs, pc);
            compose(cs, k.a, k.b, k.c)
        }
        PhaseConfig::Structured { gamma1, gamma2 } => StructuredChannel::new(cs).matrix(*gamma1, *gamma2),
    }
}

/// End-to-end channel with the double-reflection gain replaced by its
/// parallel-link approximation, for any phase configuration.
pub fn effective_channel_approx(cs: &ChannelSet, pc: &PhaseConfig) -> CMatrix {
    let k = link_coefficients(cs, pc);
    compose(cs, k.a, k.b, k.c_approx)
}

/// End-to-end channel from the element-wise matrices:
/// `R1 Phi1 T1 + R2 Phi2 T2 + R2 Phi2 S Phi1 T1`.
pub fn effective_channel_elementwise(ex: &ExactChannels, phi1: &CVector, phi2: &CVector) -> CMatrix {
    let p1t1 = scale_rows(&ex.t1, phi1);
    let p2t2 = scale_rows(&ex.t2, phi2);
    let p2sp1t1 = scale_rows(&(&ex.s * &p1t1), phi2);
    &ex.r1 * p1t1 + &ex.r2 * (p2t2 + p2sp1t1)
}

/// `diag(phi) * m`.
pub(crate) fn scale_rows(m: &CMatrix, phi: &CVector) -> CMatrix {
    let mut out = m.clone();
    for (i, mut row) in out.row_iter_mut().enumerate() {
        row *= phi[i];
    }
    out
}

/// Which of the three links contribute to the structured channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LinkMask {
    pub irs1_single: bool,
    pub irs2_single: bool,
    pub double: bool,
}

impl LinkMask {
    pub const ALL: LinkMask = LinkMask { irs1_single: true, irs2_single: true, double: true };
    pub const SINGLE_ONLY: LinkMask = LinkMask { irs1_single: true, irs2_single: true, double: false };
    pub const DOUBLE_ONLY: LinkMask = LinkMask { irs1_single: false, irs2_single: false, double: true };
}

/// Channel under the co-phasing templates as a function of the two common
/// phase shifts: `H = g1 a0 r1L t1R^T + g2 b0 r2L t2R^T + g1 g2 c0 r2L t1R^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuredChannel {
    pub a0: C64,
    pub b0: C64,
    pub c0: C64,
    pub r1: CVector,
    pub r2: CVector,
    pub t1: CVector,
    pub t2: CVector,
}

impl StructuredChannel {
    pub fn new(cs: &ChannelSet) -> Self {
        let m1 = cs.irs1_elements() as f64;
        let m2 = cs.irs2_elements() as f64;
        StructuredChannel {
            a0: kappa_a(cs) * m1,
            b0: kappa_b(cs) * m2,
            c0: kappa_c(cs) * (m1 * m2),
            r1: cs.r1.left.clone(),
            r2: cs.r2.left.clone(),
            t1: cs.t1.right.clone(),
            t2: cs.t2.right.clone(),
        }
    }

    pub fn masked(mut self, mask: LinkMask) -> Self {
        let zero = C64::new(0.0, 0.0);
        if !mask.irs1_single {
            self.a0 = zero;
        }
        if !mask.irs2_single {
            self.b0 = zero;
        }
        if !mask.double {
            self.c0 = zero;
        }
        self
    }

    /// The three rank-one link matrices without their phase factors.
    pub fn components(&self) -> (CMatrix, CMatrix, CMatrix) {
        let t1 = self.t1.transpose();
        (
            (&self.r1 * &t1) * self.a0,
            (&self.r2 * self.t2.transpose()) * self.b0,
            (&self.r2 * t1) * self.c0,
        )
    }

    pub fn matrix(&self, gamma1: C64, gamma2: C64) -> CMatrix {
        let (a, b, c) = self.components();
        a * gamma1 + b * gamma2 + c * (gamma1 * gamma2)
    }

    pub fn bs_antennas(&self) -> usize {
        self.t1.len()
    }

    pub fn user_antennas(&self) -> usize {
        self.r1.len()
    }
}

/// `|sin(pi N Theta) / (N sin(pi Theta))|`, the normalized inner product of
/// two ULA responses whose spatial frequencies differ by `theta`.
pub fn response_correlation(n: usize, theta: f64) -> f64 {
    let s = (PI * theta).sin();
    if s.abs() < 1e-9 {
        return 1.0;
    }
    ((PI * n as f64 * theta).sin() / (n as f64 * s)).abs().min(1.0)
}
