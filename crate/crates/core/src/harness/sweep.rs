use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;

use crate::analysis::{capacity_rank1_closedform, capacity_rank2_highpower, single_irs_channel};
use crate::capacity::optimal_covariance_detailed;
use crate::channel::{ChannelSet, LinkMask, StructuredChannel};
use crate::error::{Error, Result};
use crate::geometry::{dbm_to_watts, Scenario, Vec3};
use crate::optimizer::{algorithm1_structured, heuristic_structured, per_element_ao_with, AoConfig, PerElementConfig, DEFAULT_EPS};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    /// Total IRS element count.
    Elements,
    /// Transmit power in dBm.
    PowerDbm,
    /// User angle around IRS 2 in radians.
    Psi,
    None,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Elements => "elements",
            SweepAxis::PowerDbm => "tx_power_dbm",
            SweepAxis::Psi => "psi_rad",
            SweepAxis::None => "none",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Algorithm1,
    PerElementAo,
    Heuristic,
    SingleIrs,
    Rank2ClosedForm,
    Rank1ClosedForm,
    SingleReflectionOnly,
    DoubleReflectionOnly,
}

impl Algorithm {
    pub const ALL: [Algorithm; 8] = [
        Algorithm::Algorithm1,
        Algorithm::PerElementAo,
        Algorithm::Heuristic,
        Algorithm::SingleIrs,
        Algorithm::Rank2ClosedForm,
        Algorithm::Rank1ClosedForm,
        Algorithm::SingleReflectionOnly,
        Algorithm::DoubleReflectionOnly,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Algorithm1 => "algorithm1",
            Algorithm::PerElementAo => "per_element_ao",
            Algorithm::Heuristic => "heuristic",
            Algorithm::SingleIrs => "single_irs",
            Algorithm::Rank2ClosedForm => "rank2_closedform",
            Algorithm::Rank1ClosedForm => "rank1_closedform",
            Algorithm::SingleReflectionOnly => "single_reflection_only",
            Algorithm::DoubleReflectionOnly => "double_reflection_only",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::InvalidSweep(format!("unknown algorithm `{s}`")))
    }
}

/// How a total element count is divided between the two surfaces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementSplit {
    pub irs1_fraction: f64,
}

impl Default for ElementSplit {
    fn default() -> Self {
        ElementSplit { irs1_fraction: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub base: Scenario,
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub algorithms: Vec<Algorithm>,
    pub split: ElementSplit,
    pub eps: f64,
    /// Run sweep points on the rayon pool; off when wall times matter.
    pub parallel: bool,
    /// Appended to algorithm names in the output, e.g. `@20dBm`.
    pub label_suffix: String,
}

impl SweepSpec {
    pub fn new(base: Scenario, axis: SweepAxis, values: Vec<f64>, algorithms: Vec<Algorithm>) -> Self {
        SweepSpec {
            base,
            axis,
            values,
            algorithms,
            split: ElementSplit::default(),
            eps: DEFAULT_EPS,
            parallel: true,
            label_suffix: String::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.algorithms.is_empty() {
            return Err(Error::InvalidSweep("no algorithms selected".into()));
        }
        if !(self.eps > 0.0) {
            return Err(Error::InvalidSweep(format!("eps must be positive, got {}", self.eps)));
        }
        let f = self.split.irs1_fraction;
        if !(f > 0.0 && f < 1.0) {
            return Err(Error::InvalidSweep(format!("irs1_fraction must lie in (0, 1), got {f}")));
        }
        if self.axis == SweepAxis::None {
            return Ok(());
        }
        if self.values.is_empty() {
            return Err(Error::InvalidSweep("sweep values are empty".into()));
        }
        if self.values.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidSweep("sweep values must be strictly increasing".into()));
        }
        match self.axis {
            SweepAxis::Elements => {
                for &m in &self.values {
                    if m.fract() != 0.0 || m < 2.0 {
                        return Err(Error::InvalidSweep(format!("element count {m} is not an integer >= 2")));
                    }
                    if f == 0.5 && !(m as usize).is_multiple_of(2) {
                        return Err(Error::InvalidSweep(format!("element count {m} cannot be split evenly")));
                    }
                }
            }
            SweepAxis::Psi
                if self.values.iter().any(|&p| !(0.0..=FRAC_PI_2 * (1.0 + 1e-12)).contains(&p)) => {
                    return Err(Error::InvalidSweep("psi values must lie in [0, 90] degrees".into()));
                }
            _ => {}
        }
        Ok(())
    }

    /// Scenario at one sweep value.
    pub fn scenario_at(&self, value: f64) -> Result<Scenario> {
        let s = self.base.clone();
        match self.axis {
            SweepAxis::Elements => s.with_total_elements(value as usize, self.split.irs1_fraction),
            SweepAxis::PowerDbm => Ok(s.with_tx_power_dbm(value)),
            SweepAxis::Psi => psi_scenario(&s, value),
            SweepAxis::None => Ok(s),
        }
    }
}

/// Base scenario with the user on the unit circle around IRS 2:
/// `u_r = u_2 + [cos psi, -sin psi, 0]`.
pub fn psi_scenario(base: &Scenario, psi: f64) -> Result<Scenario> {
    if !(0.0..=FRAC_PI_2 * (1.0 + 1e-12)).contains(&psi) {
        return Err(Error::Domain(format!("psi = {psi} rad outside [0, pi/2]")));
    }
    let mut s = base.clone();
    s.user.position = s.irs2.position + Vec3::new(psi.cos(), -psi.sin(), 0.0);
    s.validate()?;
    Ok(s)
}

/// One output line: a single algorithm at a single sweep value.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub axis_value: f64,
    pub algorithm: String,
    /// `None` when the row failed.
    pub rate: Option<f64>,
    pub singular_values: Vec<f64>,
    pub power: Vec<f64>,
    pub iterations: usize,
    pub wall_time_s: f64,
    pub error: Option<String>,
}

struct Outcome {
    rate: f64,
    singular_values: Vec<f64>,
    power: Vec<f64>,
    iterations: usize,
}

fn run_one(s: &Scenario, algo: Algorithm, eps: f64) -> Result<Outcome> {
    let ao = AoConfig { eps, ..AoConfig::default() };
    let from_solve = |r: crate::optimizer::SolveResult| Outcome {
        rate: r.rate,
        singular_values: r.singular_values,
        power: r.power_levels,
        iterations: r.iterations,
    };
    let structured = |mask: LinkMask| -> Result<StructuredChannel> { Ok(StructuredChannel::new(&ChannelSet::new(s)?).masked(mask)) };
    match algo {
        Algorithm::Algorithm1 => Ok(from_solve(algorithm1_structured(&structured(LinkMask::ALL)?, s.tx_power, s.noise_power, &ao)?)),
        Algorithm::SingleReflectionOnly => Ok(from_solve(algorithm1_structured(
            &structured(LinkMask::SINGLE_ONLY)?,
            s.tx_power,
            s.noise_power,
            &ao,
        )?)),
        Algorithm::DoubleReflectionOnly => Ok(from_solve(algorithm1_structured(
            &structured(LinkMask::DOUBLE_ONLY)?,
            s.tx_power,
            s.noise_power,
            &ao,
        )?)),
        Algorithm::Heuristic => Ok(from_solve(heuristic_structured(&structured(LinkMask::ALL)?, s.tx_power, s.noise_power)?)),
        Algorithm::PerElementAo => {
            let cfg = PerElementConfig { ao, ..PerElementConfig::default() };
            Ok(from_solve(per_element_ao_with(&ChannelSet::new(s)?, s, &cfg)?))
        }
        Algorithm::SingleIrs => {
            let h = single_irs_channel(s)?;
            let sol = optimal_covariance_detailed(&h, s.tx_power, s.noise_power)?;
            Ok(Outcome {
                rate: sol.rate,
                singular_values: sol.spectrum.all_singular_values,
                power: sol.allocation.levels,
                iterations: 0,
            })
        }
        Algorithm::Rank2ClosedForm => Ok(Outcome {
            rate: capacity_rank2_highpower(s)?,
            singular_values: Vec::new(),
            power: vec![s.tx_power / 2.0, s.tx_power / 2.0],
            iterations: 0,
        }),
        Algorithm::Rank1ClosedForm => Ok(Outcome {
            rate: capacity_rank1_closedform(s)?.rate,
            singular_values: Vec::new(),
            power: vec![s.tx_power],
            iterations: 0,
        }),
    }
}

/// Solve one algorithm on one scenario; failures end up in the row.
pub fn solve_row(s: &Scenario, algo: Algorithm, eps: f64, axis_value: f64, label: String) -> ResultRow {
    let start = Instant::now();
    let outcome = run_one(s, algo, eps);
    let wall_time_s = start.elapsed().as_secs_f64();
    match outcome {
        Ok(o) => ResultRow {
            axis_value,
            algorithm: label,
            rate: Some(o.rate),
            singular_values: o.singular_values,
            power: o.power,
            iterations: o.iterations,
            wall_time_s,
            error: None,
        },
        Err(e) => {
            log::error!("{label} at {axis_value}: {e}");
            ResultRow {
                axis_value,
                algorithm: label,
                rate: None,
                singular_values: Vec::new(),
                power: Vec::new(),
                iterations: 0,
                wall_time_s,
                error: Some(e.to_string()),
            }
        }
    }
}

/// One row per (sweep value, algorithm), in spec order.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<ResultRow>> {
    spec.validate()?;
    let values = if spec.axis == SweepAxis::None { vec![0.0] } else { spec.values.clone() };
    let jobs: Vec<(f64, Algorithm)> = values
        .iter()
        .flat_map(|&v| spec.algorithms.iter().map(move |&a| (v, a)))
        .collect();
    let run = |&(v, a): &(f64, Algorithm)| {
        let label = format!("{}{}", a.name(), spec.label_suffix);
        match spec.scenario_at(v) {
            Ok(s) => solve_row(&s, a, spec.eps, v, label),
            Err(e) => {
                log::error!("{label} at {v}: {e}");
                ResultRow {
                    axis_value: v,
                    algorithm: label,
                    rate: None,
                    singular_values: Vec::new(),
                    power: Vec::new(),
                    iterations: 0,
                    wall_time_s: 0.0,
                    error: Some(e.to_string()),
                }
            }
        }
    };
    Ok(if spec.parallel { jobs.par_iter().map(run).collect() } else { jobs.iter().map(run).collect() })
}

/// Scenario power in dBm for labels.
pub fn power_label(dbm: f64) -> String {
    debug_assert!(dbm_to_watts(dbm) > 0.0);
    format!("@{dbm}dBm")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::predict_rank;
    use crate::geometry::link_geometry;
    use crate::geometry::Link;

    #[test]
    fn psi_endpoints() {
        let base = Scenario::reference();
        let s0 = psi_scenario(&base, 0.0).unwrap();
        assert_eq!(s0.user.position, Vec3::new(1.0, 50.0, 0.0));
        let s90 = psi_scenario(&base, FRAC_PI_2).unwrap();
        assert!((s90.user.position - Vec3::new(0.0, 49.0, 0.0)).norm() < 1e-15);
        let small = |s: Scenario| s.with_antennas(2, 2);
        assert_eq!(predict_rank(&small(s0)).unwrap().predicted_rank, 2);
        let r = predict_rank(&small(s90)).unwrap();
        assert_eq!(r.predicted_rank, 1);
        assert!((r.rho_r - 1.0).abs() < 1e-9);
        assert!(psi_scenario(&base, 2.0).is_err());
        assert!(psi_scenario(&base, -0.1).is_err());
    }

    #[test]
    fn psi_keeps_unit_distance() {
        for k in 0..=20 {
            let s = psi_scenario(&Scenario::reference(), FRAC_PI_2 * k as f64 / 20.0).unwrap();
            assert!((link_geometry(&s).unwrap().distance(Link::R2) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn algorithm_names_round_trip() {
        for a in Algorithm::ALL {
            assert_eq!(a.name().parse::<Algorithm>().unwrap(), a);
        }
        assert!("nope".parse::<Algorithm>().is_err());
    }

    #[test]
    fn spec_validation() {
        let base = Scenario::reference();
        let ok = SweepSpec::new(base.clone(), SweepAxis::Elements, vec![100.0, 200.0], vec![Algorithm::Heuristic]);
        ok.validate().unwrap();
        let odd = SweepSpec::new(base.clone(), SweepAxis::Elements, vec![101.0], vec![Algorithm::Heuristic]);
        assert!(odd.validate().is_err());
        let unsorted = SweepSpec::new(base.clone(), SweepAxis::PowerDbm, vec![10.0, 0.0], vec![Algorithm::Heuristic]);
        assert!(unsorted.validate().is_err());
        let none = SweepSpec::new(base, SweepAxis::None, vec![], vec![Algorithm::Heuristic]);
        none.validate().unwrap();
    }

    #[test]
    fn failed_rows_do_not_stop_the_sweep() {
        let base = Scenario::reference().with_antennas(3, 3);
        let spec = SweepSpec::new(base, SweepAxis::Elements, vec![100.0, 200.0], vec![Algorithm::Rank2ClosedForm, Algorithm::Heuristic]);
        let rows = run_sweep(&spec).unwrap();
        assert_eq!(rows.len(), 4);
        assert!(rows[0].rate.is_none() && rows[0].error.is_some());
        assert!(rows[1].rate.unwrap() > 0.0);
        assert_eq!(rows[2].axis_value, 200.0);
    }

    #[test]
    fn deterministic_and_ordered() {
        let base = Scenario::reference().with_antennas(2, 2);
        let spec = SweepSpec::new(
            base,
            SweepAxis::PowerDbm,
            vec![-10.0, 0.0, 10.0],
            vec![Algorithm::Algorithm1, Algorithm::Heuristic, Algorithm::SingleIrs],
        );
        let a = run_sweep(&spec).unwrap();
        let b = run_sweep(&spec).unwrap();
        let strip = |rows: Vec<ResultRow>| rows.into_iter().map(|r| (r.axis_value, r.algorithm, r.rate, r.singular_values)).collect::<Vec<_>>();
        let (a, b) = (strip(a), strip(b));
        assert_eq!(a, b);
        assert_eq!(a[0].1, "algorithm1");
        assert_eq!(a[4].1, "heuristic");
        assert!(a.chunks(3).all(|c| c[0].2.unwrap() >= c[1].2.unwrap()));
    }
}
