//! Deployment geometry: node positions, array layouts, link distances and the
//! angles between each link direction and each array axis.
//!
//! Antenna `n` (1-based) of a ULA sits at `position + (n-1) * spacing * axis`.
//! Element `(m_a, m_b)` of a URA sits at
//! `position + m_a * spacing * axis_a + m_b * spacing * axis_b`, so the
//! reference antenna/element anchors at the node position.

use nalgebra::Vector3;

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

const UNIT_TOL: f64 = 1e-12;

/// Angle between the direction `from -> to` and the unit vector `axis`, in `[0, pi]`.
pub fn angle_between(from: &Vec3, to: &Vec3, axis: &Vec3) -> Result<f64> {
    let d = to - from;
    let norm = d.norm();
    if norm == 0.0 {
        return Err(Error::DegenerateGeometry(format!(
            "coincident endpoints at [{}, {}, {}]",
            from.x, from.y, from.z
        )));
    }
    let axis_norm = axis.norm();
    if axis_norm == 0.0 {
        return Err(Error::DegenerateGeometry("zero-length base direction".into()));
    }
    // normalized inner products can overshoot 1 by a few ulps
    let cos = (d.dot(axis) / (norm * axis_norm)).clamp(-1.0, 1.0);
    Ok(cos.acos())
}

/// Flat 1-based element index `1 + m_a + m_b * count_a` of a URA element.
pub fn ura_index(m_a: usize, m_b: usize, count_a: usize) -> Result<usize> {
    if m_a >= count_a {
        return Err(Error::IndexOutOfRange(format!(
            "sub-index m_a = {m_a} outside 0..{count_a}"
        )));
    }
    Ok(1 + m_a + m_b * count_a)
}

/// Element counts along the two base directions of a rectangular array.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UraLayout {
    pub count_a: usize,
    pub count_b: usize,
}

impl UraLayout {
    pub fn new(count_a: usize, count_b: usize) -> Self {
        Self { count_a, count_b }
    }

    /// Near-square factorization `count_a <= count_b` with `count_a` the
    /// largest divisor of `total` not exceeding its square root.
    pub fn near_square(total: usize) -> Self {
        let mut a = (total as f64).sqrt().floor() as usize;
        while a > 1 && !total.is_multiple_of(a) {
            a -= 1;
        }
        let a = a.max(1);
        Self::new(a, total / a)
    }

    pub fn total(&self) -> usize {
        self.count_a * self.count_b
    }

    /// 1-based flat index, bounds-checked on both sub-indices.
    pub fn flat_index(&self, m_a: usize, m_b: usize) -> Result<usize> {
        if m_b >= self.count_b {
            return Err(Error::IndexOutOfRange(format!(
                "sub-index m_b = {m_b} outside 0..{}",
                self.count_b
            )));
        }
        ura_index(m_a, m_b, self.count_a)
    }

    /// Inverse of [`UraLayout::flat_index`].
    pub fn sub_indices(&self, m: usize) -> Result<(usize, usize)> {
        if m == 0 || m > self.total() {
            return Err(Error::IndexOutOfRange(format!(
                "flat index {m} outside 1..={}",
                self.total()
            )));
        }
        let k = m - 1;
        Ok((k % self.count_a, k / self.count_a))
    }
}

/// Uniform linear array at the BS or the user.
#[derive(Debug, Clone, PartialEq)]
pub struct Ula {
    pub position: Vec3,
    pub axis: Vec3,
    pub count: usize,
}

impl Ula {
    pub fn antenna_position(&self, index0: usize, spacing: f64) -> Vec3 {
        self.position + self.axis * (index0 as f64 * spacing)
    }
}

/// Uniform rectangular array of reflecting elements.
#[derive(Debug, Clone, PartialEq)]
pub struct Ura {
    pub position: Vec3,
    pub axis_a: Vec3,
    pub axis_b: Vec3,
    pub layout: UraLayout,
}

impl Ura {
    pub fn element_count(&self) -> usize {
        self.layout.total()
    }

    /// Position of the element with 0-based flat index `index0`.
    pub fn element_position(&self, index0: usize, spacing: f64) -> Vec3 {
        let m_a = index0 % self.layout.count_a;
        let m_b = index0 / self.layout.count_a;
        self.position + self.axis_a * (m_a as f64 * spacing) + self.axis_b * (m_b as f64 * spacing)
    }
}

/// Full physical description of a double-IRS deployment. Lengths in meters,
/// powers in watts, `path_gain` is the linear power gain at 1 m.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub bs: Ula,
    pub user: Ula,
    pub irs1: Ura,
    pub irs2: Ura,
    pub antenna_spacing: f64,
    pub element_spacing: f64,
    pub wavelength: f64,
    pub path_gain: f64,
    pub tx_power: f64,
    pub noise_power: f64,
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * watts.log10() + 30.0
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub const REFERENCE_WAVELENGTH: f64 = 0.087;
pub const REFERENCE_PATH_GAIN_DB: f64 = -43.0;
pub const REFERENCE_NOISE_DBM: f64 = -70.0;
pub const REFERENCE_TX_POWER_DBM: f64 = -10.0;
pub const REFERENCE_TOTAL_ELEMENTS: usize = 1000;

impl Scenario {
    /// The evaluation deployment: BS at [1,0,0], user at [1,50,0], IRS 1 at
    /// the origin, IRS 2 at [0,50,0], 4x2 antennas, 1000 elements split
    /// evenly, 0.087 m carrier, -43 dB path gain, -70 dBm noise, -10 dBm power.
    pub fn reference() -> Self {
        let half_sqrt3 = 3f64.sqrt() / 2.0;
        let wavelength = REFERENCE_WAVELENGTH;
        let half = REFERENCE_TOTAL_ELEMENTS / 2;
        Scenario {
            bs: Ula {
                position: Vec3::new(1.0, 0.0, 0.0),
                axis: Vec3::new(-1.0, 0.0, 0.0),
                count: 4,
            },
            user: Ula {
                position: Vec3::new(1.0, 50.0, 0.0),
                axis: Vec3::new(-1.0, 0.0, 0.0),
                count: 2,
            },
            irs1: Ura {
                position: Vec3::zeros(),
                axis_a: Vec3::new(-0.5, half_sqrt3, 0.0),
                axis_b: Vec3::new(0.0, 0.0, 1.0),
                layout: UraLayout::near_square(half),
            },
            irs2: Ura {
                position: Vec3::new(0.0, 50.0, 0.0),
                axis_a: Vec3::new(0.0, 0.0, 1.0),
                axis_b: Vec3::new(-0.5, -half_sqrt3, 0.0),
                layout: UraLayout::near_square(half),
            },
            antenna_spacing: wavelength / 2.0,
            element_spacing: wavelength / 10.0,
            wavelength,
            path_gain: db_to_linear(REFERENCE_PATH_GAIN_DB),
            tx_power: dbm_to_watts(REFERENCE_TX_POWER_DBM),
            noise_power: dbm_to_watts(REFERENCE_NOISE_DBM),
        }
    }

    pub fn total_elements(&self) -> usize {
        self.irs1.element_count() + self.irs2.element_count()
    }

    pub fn with_antennas(mut self, bs: usize, user: usize) -> Self {
        self.bs.count = bs;
        self.user.count = user;
        self
    }

    pub fn with_tx_power_dbm(mut self, dbm: f64) -> Self {
        self.tx_power = dbm_to_watts(dbm);
        self
    }

    /// Redistribute `total` elements, giving IRS 1 `round(total * irs1_fraction)`
    /// and laying each surface out as a near-square URA.
    pub fn with_total_elements(mut self, total: usize, irs1_fraction: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&irs1_fraction) {
            return Err(Error::invalid("irs1_fraction", "must lie in [0, 1]"));
        }
        let m1 = (total as f64 * irs1_fraction).round() as usize;
        let m2 = total.saturating_sub(m1);
        if m1 == 0 || m2 == 0 {
            return Err(Error::invalid(
                "total_elements",
                format!("split of {total} leaves an IRS with no elements"),
            ));
        }
        self.irs1.layout = UraLayout::near_square(m1);
        self.irs2.layout = UraLayout::near_square(m2);
        Ok(self)
    }

    /// Checks every invariant, naming the offending field on failure.
    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: &Vec3| -> Result<()> {
            let n = v.norm();
            if !n.is_finite() || (n - 1.0).abs() > UNIT_TOL {
                return Err(Error::invalid(name, format!("base direction must be unit length, got norm {n}")));
            }
            Ok(())
        };
        unit("v_t", &self.bs.axis)?;
        unit("v_r", &self.user.axis)?;
        unit("v_1a", &self.irs1.axis_a)?;
        unit("v_1b", &self.irs1.axis_b)?;
        unit("v_2a", &self.irs2.axis_a)?;
        unit("v_2b", &self.irs2.axis_b)?;
        for (name, irs) in [("v_1a/v_1b", &self.irs1), ("v_2a/v_2b", &self.irs2)] {
            let ip = irs.axis_a.dot(&irs.axis_b);
            if ip.abs() >= UNIT_TOL {
                return Err(Error::invalid(name, format!("IRS base directions must be orthogonal, inner product {ip}")));
            }
        }
        let counts = [
            ("N_t", self.bs.count),
            ("N_r", self.user.count),
            ("M1a", self.irs1.layout.count_a),
            ("M1b", self.irs1.layout.count_b),
            ("M2a", self.irs2.layout.count_a),
            ("M2b", self.irs2.layout.count_b),
        ];
        for (name, c) in counts {
            if c == 0 {
                return Err(Error::invalid(name, "count must be at least 1"));
            }
        }
        let positive = [
            ("l_n", self.antenna_spacing),
            ("l_m", self.element_spacing),
            ("lambda", self.wavelength),
            ("alpha", self.path_gain),
            ("P", self.tx_power),
            ("sigma2", self.noise_power),
        ];
        for (name, x) in positive {
            if !(x.is_finite() && x > 0.0) {
                return Err(Error::invalid(name, format!("must be positive and finite, got {x}")));
            }
        }
        for (name, p) in [
            ("u_t", &self.bs.position),
            ("u_r", &self.user.position),
            ("u_1", &self.irs1.position),
            ("u_2", &self.irs2.position),
        ] {
            if !p.iter().all(|c| c.is_finite()) {
                return Err(Error::invalid(name, "position must be finite"));
            }
        }
        let distinct = [
            ("u_1", &self.irs1.position, &self.bs.position, "BS"),
            ("u_2", &self.irs2.position, &self.user.position, "user"),
            ("u_2", &self.irs2.position, &self.irs1.position, "IRS 1"),
            ("u_1", &self.irs1.position, &self.user.position, "user"),
            ("u_2", &self.irs2.position, &self.bs.position, "BS"),
        ];
        for (name, a, b, other) in distinct {
            if (a - b).norm() == 0.0 {
                return Err(Error::invalid(name, format!("coincides with the {other} position")));
            }
        }
        Ok(())
    }
}

/// The five constituent LoS links.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Link {
    /// BS to IRS 1.
    T1,
    /// BS to IRS 2.
    T2,
    /// IRS 1 to user.
    R1,
    /// IRS 2 to user.
    R2,
    /// IRS 1 to IRS 2.
    S,
}

impl Link {
    pub const ALL: [Link; 5] = [Link::T1, Link::T2, Link::R1, Link::R2, Link::S];

    fn slot(self) -> usize {
        self as usize
    }
}

/// Array base directions an angle can be measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    Bs,
    User,
    Irs1A,
    Irs1B,
    Irs2A,
    Irs2B,
}

impl Axis {
    fn slot(self) -> usize {
        self as usize
    }
}

/// Link distances and the angle table `omega(link, axis)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkGeometry {
    distances: [f64; 5],
    omega: [[Option<f64>; 6]; 5],
}

impl LinkGeometry {
    pub fn distance(&self, link: Link) -> f64 {
        self.distances[link.slot()]
    }

    /// Angle in radians between `link`'s direction and `axis`, or `None` when
    /// the axis does not belong to either end of the link.
    pub fn omega(&self, link: Link, axis: Axis) -> Option<f64> {
        self.omega[link.slot()][axis.slot()]
    }

    /// Same as [`LinkGeometry::omega`] for pairs known to be populated.
    pub(crate) fn angle(&self, link: Link, axis: Axis) -> f64 {
        self.omega(link, axis)
            .unwrap_or_else(|| panic!("no angle between {link:?} and {axis:?}"))
    }
}

/// Endpoints of a link, ordered by propagation direction.
pub fn link_endpoints(s: &Scenario, link: Link) -> (Vec3, Vec3) {
    match link {
        Link::T1 => (s.bs.position, s.irs1.position),
        Link::T2 => (s.bs.position, s.irs2.position),
        Link::R1 => (s.irs1.position, s.user.position),
        Link::R2 => (s.irs2.position, s.user.position),
        Link::S => (s.irs1.position, s.irs2.position),
    }
}

fn link_axes(s: &Scenario, link: Link) -> Vec<(Axis, Vec3)> {
    let irs1 = [(Axis::Irs1A, s.irs1.axis_a), (Axis::Irs1B, s.irs1.axis_b)];
    let irs2 = [(Axis::Irs2A, s.irs2.axis_a), (Axis::Irs2B, s.irs2.axis_b)];
    let bs = (Axis::Bs, s.bs.axis);
    let user = (Axis::User, s.user.axis);
    match link {
        Link::T1 => vec![bs, irs1[0], irs1[1]],
        Link::T2 => vec![bs, irs2[0], irs2[1]],
        Link::R1 => vec![user, irs1[0], irs1[1]],
        Link::R2 => vec![user, irs2[0], irs2[1]],
        Link::S => vec![irs1[0], irs1[1], irs2[0], irs2[1]],
    }
}

pub fn link_geometry(s: &Scenario) -> Result<LinkGeometry> {
    let mut distances = [0.0; 5];
    let mut omega = [[None; 6]; 5];
    for link in Link::ALL {
        let (from, to) = link_endpoints(s, link);
        let d = (to - from).norm();
        if d == 0.0 {
            return Err(Error::DegenerateGeometry(format!("zero-length link {link:?}")));
        }
        distances[link.slot()] = d;
        for (axis, v) in link_axes(s, link) {
            omega[link.slot()][axis.slot()] = Some(angle_between(&from, &to, &v)?);
        }
    }
    Ok(LinkGeometry { distances, omega })
}
