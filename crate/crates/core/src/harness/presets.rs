//! Named sweeps matching the evaluation figures.

use crate::error::{Error, Result};
use crate::geometry::Scenario;
use crate::harness::sweep::{power_label, Algorithm, SweepAxis, SweepSpec};

pub const PRESET_NAMES: [&str; 10] = ["fig4a", "fig4b", "fig4c", "fig5a", "fig5b", "fig5c", "fig5d", "fig6a", "fig6b", "fig7b"];

const M_ALGO: [f64; 6] = [100.0, 200.0, 400.0, 600.0, 800.0, 1000.0];
const M_WIDE: [f64; 7] = [20.0, 50.0, 100.0, 200.0, 500.0, 1000.0, 2000.0];

fn base(nt: usize, nr: usize, dbm: f64) -> Scenario {
    Scenario::reference().with_antennas(nt, nr).with_tx_power_dbm(dbm)
}

fn power_sweep() -> Vec<f64> {
    (0..=10).map(|k| -10.0 + 5.0 * k as f64).collect()
}

fn fig5(dbm: f64) -> SweepSpec {
    use Algorithm::*;
    SweepSpec::new(
        base(4, 2, dbm),
        SweepAxis::Elements,
        M_WIDE.to_vec(),
        vec![Algorithm1, SingleIrs, SingleReflectionOnly, DoubleReflectionOnly],
    )
}

/// The sweeps behind a named figure. Multi-curve figures return several specs.
pub fn preset(name: &str) -> Result<Vec<SweepSpec>> {
    use Algorithm::*;
    let specs = match name {
        "fig4a" | "fig4b" => {
            let dbm = if name == "fig4a" { -10.0 } else { 20.0 };
            vec![SweepSpec::new(base(3, 3, dbm), SweepAxis::Elements, M_ALGO.to_vec(), vec![Algorithm1, PerElementAo, Heuristic])]
        }
        "fig4c" => {
            let mut spec = SweepSpec::new(base(3, 3, -10.0), SweepAxis::Elements, M_ALGO.to_vec(), vec![Algorithm1, PerElementAo]);
            spec.parallel = false;
            vec![spec]
        }
        "fig5a" => vec![fig5(-10.0)],
        "fig5b" => vec![fig5(5.0)],
        "fig5c" => vec![fig5(20.0)],
        "fig5d" => {
            let mut spec = fig5(-10.0);
            spec.axis = SweepAxis::PowerDbm;
            spec.values = power_sweep();
            spec.base = spec.base.with_total_elements(1000, 0.5)?;
            spec.algorithms.push(Rank2ClosedForm);
            vec![spec]
        }
        "fig6a" | "fig6b" => [-10.0, 5.0, 20.0]
            .into_iter()
            .map(|dbm| {
                let mut spec = SweepSpec::new(base(4, 2, dbm), SweepAxis::Elements, M_WIDE.to_vec(), vec![Algorithm1]);
                spec.label_suffix = power_label(dbm);
                spec
            })
            .collect(),
        "fig7b" => {
            let values = (0..=18).map(|k| (5.0 * k as f64).to_radians()).collect();
            vec![SweepSpec::new(base(2, 2, 20.0), SweepAxis::Psi, values, vec![Algorithm1])]
        }
        other => {
            return Err(Error::InvalidSweep(format!(
                "unknown preset `{other}` (expected one of {})",
                PRESET_NAMES.join(", ")
            )))
        }
    };
    for s in &specs {
        s.validate()?;
    }
    Ok(specs)
}
