//! Closed-form capacity results: rank prediction, high-power rank-two
//! capacity, rank-one capacity with its optimal common phases, the
//! single-IRS baseline, determinant/trace identities and scaling fits.

use std::f64::consts::PI;

use crate::capacity::optimal_covariance_detailed;
use crate::channel::{effective_channel_approx, link_coefficients, response_correlation, ChannelSet, PhaseConfig};
use crate::error::{Error, Result};
use crate::geometry::{link_geometry, Axis, Link, LinkGeometry, Scenario, UraLayout};
use crate::{CMatrix, C64};

const RHO_ONE_TOL: f64 = 1e-9;

/// Predicted rank of the end-to-end channel under co-phasing templates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankPrediction {
    pub predicted_rank: usize,
    pub theta_t: f64,
    pub theta_r: f64,
    pub rho_t: f64,
    pub rho_r: f64,
    /// Classified rank one only because a correlation fell within the
    /// tolerance band around 1 without equalling it.
    pub borderline: bool,
}

/// `(Theta_t, Theta_r)`: spatial-frequency offsets between the two
/// single-reflection links at the BS and at the user.
pub fn spatial_offsets(s: &Scenario, g: &LinkGeometry) -> (f64, f64) {
    let k = s.antenna_spacing / s.wavelength;
    let cos = |l, a| g.angle(l, a).cos();
    let theta_t = k * (cos(Link::T2, Axis::Bs) - cos(Link::T1, Axis::Bs));
    let theta_r = k * (cos(Link::R1, Axis::User) - cos(Link::R2, Axis::User));
    (theta_t, theta_r)
}

pub fn predict_rank(s: &Scenario) -> Result<RankPrediction> {
    let g = link_geometry(s)?;
    let (theta_t, theta_r) = spatial_offsets(s, &g);
    let rho_t = response_correlation(s.bs.count, theta_t);
    let rho_r = response_correlation(s.user.count, theta_r);
    let near_t = (rho_t - 1.0).abs() < RHO_ONE_TOL;
    let near_r = (rho_r - 1.0).abs() < RHO_ONE_TOL;
    let predicted_rank = if near_t || near_r { 1 } else { 2 };
    let borderline = (near_t && rho_t != 1.0) || (near_r && rho_r != 1.0);
    if borderline {
        log::warn!("rank prediction is borderline: rho_t = {rho_t}, rho_r = {rho_r}");
    }
    Ok(RankPrediction { predicted_rank, theta_t, theta_r, rho_t, rho_r, borderline })
}

/// Angle-only rank test valid for antenna spacing up to half a wavelength:
/// rank two iff the two departure angles at the BS differ and the two
/// arrival angles at the user differ. `None` for wider spacing. At exactly
/// half a wavelength an endfire pair (0 and pi) is rank one although the
/// angles differ; `predict_rank` is the reliable test there.
pub fn angle_rank(s: &Scenario) -> Result<Option<usize>> {
    if s.antenna_spacing > s.wavelength / 2.0 * (1.0 + 1e-12) {
        return Ok(None);
    }
    let g = link_geometry(s)?;
    let differ = |x: f64, y: f64| (x - y).abs() > 1e-9;
    let bs = s.bs.count > 1 && differ(g.angle(Link::T1, Axis::Bs), g.angle(Link::T2, Axis::Bs));
    let user = s.user.count > 1 && differ(g.angle(Link::R1, Axis::User), g.angle(Link::R2, Axis::User));
    Ok(Some(if bs && user { 2 } else { 1 }))
}

/// Peak link-gain magnitudes `(|a|, |b|, |c|)` under co-phasing templates.
fn peak_gains(s: &Scenario, g: &LinkGeometry) -> (f64, f64, f64) {
    let alpha = s.path_gain;
    let m1 = s.irs1.element_count() as f64;
    let m2 = s.irs2.element_count() as f64;
    let d = |l| g.distance(l);
    (
        alpha * m1 / (d(Link::R1) * d(Link::T1)),
        alpha * m2 / (d(Link::R2) * d(Link::T2)),
        alpha.powf(1.5) * m1 * m2 / (d(Link::R2) * d(Link::S) * d(Link::T1)),
    )
}

/// High-power capacity of a rank-two `N_t x 2` channel with an even element
/// split and equal power on both eigenchannels.
pub fn capacity_rank2_highpower(s: &Scenario) -> Result<f64> {
    if s.user.count != 2 {
        return Err(Error::Domain(format!("requires 2 user antennas, got {}", s.user.count)));
    }
    if s.irs1.element_count() != s.irs2.element_count() {
        return Err(Error::Domain("requires an even element split between the two surfaces".into()));
    }
    let rank = predict_rank(s)?;
    if rank.predicted_rank != 2 {
        return Err(Error::Domain("channel is rank one".into()));
    }
    let g = link_geometry(s)?;
    let d = |l| g.distance(l);
    let nt = s.bs.count as f64;
    let m = s.total_elements() as f64;
    let gain = s.path_gain.powi(4) * nt * nt * m.powi(4) * s.tx_power * s.tx_power
        / (16.0 * (d(Link::R1) * d(Link::T1) * d(Link::R2) * d(Link::T2)).powi(2) * s.noise_power.powi(2));
    Ok((gain * (1.0 - rank.rho_t.powi(2)) * (1.0 - rank.rho_r.powi(2))).log2())
}

/// Rank-one capacity and the common phases attaining it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rank1Solution {
    pub rate: f64,
    pub gamma1: C64,
    pub gamma2: C64,
}

fn reference_phases(s: &Scenario, g: &LinkGeometry) -> (f64, f64, f64) {
    let k = -2.0 * PI / s.wavelength;
    let d = |l| g.distance(l);
    (
        k * (d(Link::R1) + d(Link::T1)),
        k * (d(Link::R2) + d(Link::T2)),
        k * (d(Link::R2) + d(Link::S) + d(Link::T1)),
    )
}

/// Capacity of a rank-one `N_t x 2` channel whose two BS responses coincide.
pub fn capacity_rank1_closedform(s: &Scenario) -> Result<Rank1Solution> {
    if s.user.count != 2 {
        return Err(Error::Domain(format!("requires 2 user antennas, got {}", s.user.count)));
    }
    let rank = predict_rank(s)?;
    if (rank.rho_t - 1.0).abs() >= RHO_ONE_TOL {
        return Err(Error::Domain(format!(
            "requires identical BS-side responses (rho_t = 1), got rho_t = {}",
            rank.rho_t
        )));
    }
    let g = link_geometry(s)?;
    let (a, b, c) = peak_gains(s, &g);
    let (arg_a, arg_b, arg_c) = reference_phases(s, &g);
    // align b and c, then rotate the combined term onto a, including the
    // offset between the two user-side responses
    let arg_g1 = arg_b - arg_c;
    let cos_r = (PI * rank.theta_r).cos();
    let flip = if cos_r < 0.0 { PI } else { 0.0 };
    let arg_g2 = arg_a - arg_c - PI * rank.theta_r + flip;
    let nt = s.bs.count as f64;
    let bc = b + c;
    let delta_sq = 2.0 * nt * (a * a + bc * bc + 2.0 * a * bc * rank.rho_r);
    Ok(Rank1Solution {
        rate: (1.0 + s.tx_power * delta_sq / s.noise_power).log2(),
        gamma1: C64::from_polar(1.0, arg_g1),
        gamma2: C64::from_polar(1.0, arg_g2),
    })
}

/// `tr(H H^H)` of a rank-one channel with identical BS-side responses,
/// from the link gains and the user-side offset.
pub fn rank1_trace_closed_form(s: &Scenario, pc: &PhaseConfig) -> Result<f64> {
    if s.user.count != 2 {
        return Err(Error::Domain(format!("requires 2 user antennas, got {}", s.user.count)));
    }
    let cs = ChannelSet::new(s)?;
    let g = link_geometry(s)?;
    let (_, theta_r) = spatial_offsets(s, &g);
    let k = link_coefficients(&cs, pc);
    let bc = k.b + k.c_approx;
    let nt = s.bs.count as f64;
    let cross = (PI * theta_r).cos() * (PI * theta_r + bc.arg() - k.a.arg()).cos();
    Ok(2.0 * nt * (k.a.norm_sqr() + bc.norm_sqr()) + 4.0 * nt * k.a.norm() * bc.norm() * cross)
}

/// Single-IRS baseline: all elements on IRS 2 and IRS 1 removed.
pub fn single_irs_scenario(s: &Scenario) -> Scenario {
    let mut out = s.clone();
    out.irs2.layout = UraLayout::near_square(s.total_elements());
    out
}

/// Closed-form single-IRS capacity for two user antennas.
pub fn single_irs_closed_form(s: &Scenario) -> Result<f64> {
    if s.user.count != 2 {
        return Err(Error::Domain(format!("requires 2 user antennas, got {}", s.user.count)));
    }
    let g = link_geometry(s)?;
    let m = s.total_elements() as f64;
    let nt = s.bs.count as f64;
    let snr = 2.0 * s.path_gain.powi(2) * nt * m * m * s.tx_power
        / ((g.distance(Link::R2) * g.distance(Link::T2)).powi(2) * s.noise_power);
    Ok((1.0 + snr).log2())
}

/// Single-IRS channel under its optimal reflection `conj(r_R) .* conj(t_L)`.
pub fn single_irs_channel(s: &Scenario) -> Result<CMatrix> {
    let single = single_irs_scenario(s);
    let cs = ChannelSet::new(&single)?;
    let phi = cs.template2(C64::new(1.0, 0.0));
    let p_t = crate::channel::scale_rows(&cs.t2.matrix(), &phi);
    Ok(cs.r2.matrix() * p_t)
}

/// Numerically optimized single-IRS rate for any antenna counts.
pub fn single_irs_numeric(s: &Scenario) -> Result<f64> {
    let h = single_irs_channel(s)?;
    Ok(optimal_covariance_detailed(&h, s.tx_power, s.noise_power)?.rate)
}

pub fn single_irs_capacity(s: &Scenario) -> Result<f64> {
    if s.user.count == 2 {
        single_irs_closed_form(s)
    } else {
        single_irs_numeric(s)
    }
}

/// `(4 N_t^2 |a b|^2 (1 - rho_t^2)(1 - rho_r^2), |det(H H^H)|)`.
pub fn det_product_identity(s: &Scenario, pc: &PhaseConfig) -> Result<(f64, f64)> {
    if s.user.count != 2 {
        return Err(Error::Domain(format!("requires 2 user antennas, got {}", s.user.count)));
    }
    let cs = ChannelSet::new(s)?;
    let rank = predict_rank(s)?;
    let k = link_coefficients(&cs, pc);
    let nt = s.bs.count as f64;
    let closed = 4.0 * nt * nt * (k.a * k.b).norm_sqr() * (1.0 - rank.rho_t.powi(2)) * (1.0 - rank.rho_r.powi(2));
    let h = effective_channel_approx(&cs, pc);
    let numerical = (&h * h.adjoint()).determinant().norm();
    Ok((closed, numerical))
}

/// `(sum of |H_{nr,nt}|^2 from the explicit entry formula, tr(H H^H))`.
pub fn trace_identity(s: &Scenario, pc: &PhaseConfig) -> Result<(f64, f64)> {
    let cs = ChannelSet::new(s)?;
    let g = link_geometry(s)?;
    let k = link_coefficients(&cs, pc);
    let w = -2.0 * PI * s.antenna_spacing / s.wavelength;
    let cos = |l, a| g.angle(l, a).cos();
    let (ct1, ct2) = (cos(Link::T1, Axis::Bs), cos(Link::T2, Axis::Bs));
    let (cr1, cr2) = (cos(Link::R1, Axis::User), cos(Link::R2, Axis::User));
    let mut sum = 0.0;
    for nr in 0..s.user.count {
        for nt in 0..s.bs.count {
            let (nr, nt) = (nr as f64, nt as f64);
            let entry = k.a * C64::from_polar(1.0, w * (nr * cr1 - nt * ct1))
                + k.b * C64::from_polar(1.0, w * (nr * cr2 - nt * ct2))
                + k.c_approx * C64::from_polar(1.0, w * (nr * cr2 - nt * ct1));
            sum += entry.norm_sqr();
        }
    }
    let h = effective_channel_approx(&cs, pc);
    Ok((sum, (&h * h.adjoint()).trace().re))
}

/// Quantity a scaling fit is taken against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalingAxis {
    /// Total number of IRS elements.
    Elements,
    /// Transmit power in linear units.
    Power,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingFit {
    pub axis: ScalingAxis,
    pub points: Vec<(f64, f64)>,
    /// Rate increase per doubling of the abscissa, averaged over the last
    /// two intervals.
    pub slope: f64,
}

/// Estimate the scaling order `lim C / log2(x)` from points whose abscissae
/// form a geometric progression.
pub fn scaling_fit(points: &[(f64, f64)], axis: ScalingAxis) -> Result<ScalingFit> {
    if points.len() < 3 {
        return Err(Error::Domain(format!("need at least 3 points, got {}", points.len())));
    }
    if points.iter().any(|p| !(p.0 > 0.0) || !p.1.is_finite()) {
        return Err(Error::Domain("abscissae must be positive and rates finite".into()));
    }
    let ratio = points[1].0 / points[0].0;
    if !(ratio > 1.0) {
        return Err(Error::Domain("abscissae must be strictly increasing".into()));
    }
    for w in points.windows(2) {
        let r = w[1].0 / w[0].0;
        if (r - ratio).abs() > 1e-9 * ratio {
            return Err(Error::Domain(format!(
                "abscissae must grow by a constant factor, saw {ratio} and {r}"
            )));
        }
    }
    let n = points.len();
    let per_doubling = |i: usize| (points[i + 1].1 - points[i].1) / (points[i + 1].0 / points[i].0).log2();
    let slope = 0.5 * (per_doubling(n - 3) + per_doubling(n - 2));
    Ok(ScalingFit { axis, points: points.to_vec(), slope })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::capacity::{spectral, DEFAULT_RANK_TOL};
    use crate::channel::effective_channel;
    use crate::geometry::{dbm_to_watts, Vec3};
    use crate::optimizer::{algorithm1, DEFAULT_EPS};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Orthogonal single-reflection responses at both ends: BS-IRS1 endfire,
    /// BS-IRS2 broadside, IRS1-user broadside, IRS2-user endfire.
    fn orthogonal_geometry() -> Scenario {
        let mut s = Scenario::reference().with_antennas(2, 2).with_total_elements(100, 0.5).unwrap();
        s.bs.position = Vec3::new(1.0, 0.0, 0.0);
        s.irs1.position = Vec3::zeros();
        s.irs2.position = Vec3::new(1.0, 50.0, 1.0);
        s.user.position = Vec3::new(1.0, 50.0, 0.0);
        s.bs.axis = Vec3::new(-1.0, 0.0, 0.0);
        s.user.axis = Vec3::new(0.0, 0.0, 1.0);
        s
    }

    /// All four BS/user angles at broadside.
    fn aligned_geometry(nt: usize, m: usize) -> Scenario {
        let mut s = Scenario::reference().with_antennas(nt, 2).with_total_elements(m, 0.5).unwrap();
        s.bs.axis = Vec3::new(0.0, 0.0, 1.0);
        s.user.axis = Vec3::new(0.0, 0.0, 1.0);
        s
    }

    fn numeric_rank(s: &Scenario) -> usize {
        let cs = ChannelSet::new(s).unwrap();
        spectral(&effective_channel(&cs, &PhaseConfig::unit()), DEFAULT_RANK_TOL).numerical_rank
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
    }

    #[test]
    fn orthogonal_geometry_is_rank_two_with_zero_correlation() {
        let s = orthogonal_geometry();
        let g = link_geometry(&s).unwrap();
        assert_eq!(g.angle(Link::T1, Axis::Bs), 0.0);
        assert!((g.angle(Link::T2, Axis::Bs) - PI / 2.0).abs() < 1e-12);
        assert!((g.angle(Link::R1, Axis::User) - PI / 2.0).abs() < 1e-12);
        assert!((g.angle(Link::R2, Axis::User) - PI).abs() < 1e-12);
        let r = predict_rank(&s).unwrap();
        assert_eq!(r.predicted_rank, 2);
        assert!(r.rho_t < 1e-12 && r.rho_r < 1e-12);
        assert!((r.theta_t + 0.5).abs() < 1e-12);
        assert_eq!(numeric_rank(&s), 2);
        assert_eq!(angle_rank(&s).unwrap(), Some(2));
    }

    #[test]
    fn aligned_geometry_is_rank_one() {
        let s = aligned_geometry(2, 100);
        let r = predict_rank(&s).unwrap();
        assert_eq!(r.predicted_rank, 1);
        assert_eq!((r.rho_t, r.rho_r), (1.0, 1.0));
        assert!(!r.borderline);
        assert_eq!(numeric_rank(&s), 1);
        assert_eq!(angle_rank(&s).unwrap(), Some(1));
    }

    #[test]
    fn reference_geometry_is_rank_two() {
        let s = Scenario::reference();
        assert_eq!(predict_rank(&s).unwrap().predicted_rank, 2);
        assert_eq!(numeric_rank(&s), 2);
    }

    #[test]
    fn prediction_matches_svd_on_random_geometries() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let mut checked = 0;
        while checked < 200 {
            let mut s = Scenario::reference().with_antennas(rng.gen_range(2..5), rng.gen_range(2..4)).with_total_elements(40, 0.5).unwrap();
            let mut jitter = || Vec3::new(rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0));
            s.bs.position += jitter();
            s.user.position += jitter();
            s.bs.axis = jitter().normalize();
            s.user.axis = jitter().normalize();
            let r = predict_rank(&s).unwrap();
            if (r.rho_t - 1.0).abs() <= 1e-3 || (r.rho_r - 1.0).abs() <= 1e-3 {
                continue;
            }
            assert_eq!(r.predicted_rank, numeric_rank(&s));
            if let Some(k) = angle_rank(&s).unwrap() {
                assert_eq!(k, r.predicted_rank);
            }
            checked += 1;
        }
    }

    #[test]
    fn rank2_highpower_scaling_is_exact() {
        let base = Scenario::reference().with_tx_power_dbm(20.0);
        let c1 = capacity_rank2_highpower(&base).unwrap();
        let c2 = capacity_rank2_highpower(&base.clone().with_total_elements(2000, 0.5).unwrap()).unwrap();
        assert!((c2 - c1 - 4.0).abs() < 1e-10);
        let mut double_p = base.clone();
        double_p.tx_power *= 2.0;
        assert!((capacity_rank2_highpower(&double_p).unwrap() - c1 - 2.0).abs() < 1e-10);
        assert!(matches!(capacity_rank2_highpower(&aligned_geometry(4, 100)), Err(Error::Domain(_))));
    }

    #[test]
    fn rank2_highpower_matches_algorithm1() {
        let s = Scenario::reference().with_tx_power_dbm(30.0);
        let cs = ChannelSet::new(&s).unwrap();
        let rate = algorithm1(&cs, &s, DEFAULT_EPS).unwrap().rate;
        let closed = capacity_rank2_highpower(&s).unwrap();
        assert!((rate - closed).abs() < 0.02, "{rate} {closed}");
    }

    #[test]
    fn rank1_closed_form_matches_trace_and_algorithm1() {
        let s = aligned_geometry(4, 200).with_tx_power_dbm(0.0);
        let sol = capacity_rank1_closedform(&s).unwrap();
        let cs = ChannelSet::new(&s).unwrap();
        let pc = PhaseConfig::structured(sol.gamma1, sol.gamma2);
        let h = effective_channel(&cs, &pc);
        let tr = (&h * h.adjoint()).trace().re;
        let direct = (1.0 + s.tx_power * tr / s.noise_power).log2();
        assert!(rel(direct, sol.rate) < 1e-6);
        assert!(rel(rank1_trace_closed_form(&s, &pc).unwrap(), tr) < 1e-6);
        let ao = algorithm1(&cs, &s, 1e-10).unwrap().rate;
        assert!((ao - sol.rate).abs() < 1e-4, "{ao} {}", sol.rate);
    }

    #[test]
    fn rank1_even_split_form() {
        // with rho_r = 1 the closed form reduces to the even-split expression
        let s = aligned_geometry(4, 400).with_tx_power_dbm(10.0);
        let g = link_geometry(&s).unwrap();
        let d = |l| g.distance(l);
        let (alpha, m, nt) = (s.path_gain, 400.0, 4.0);
        let bc = alpha / (2.0 * m * d(Link::R2) * d(Link::T2)) + alpha.powf(1.5) / (4.0 * d(Link::R2) * d(Link::S) * d(Link::T1));
        let a = alpha / (2.0 * m * d(Link::R1) * d(Link::T1));
        let inner = a * a + bc * bc + 2.0 * a * bc;
        let want = (1.0 + 2.0 * nt * m.powi(4) * s.tx_power / s.noise_power * inner).log2();
        assert!(rel(capacity_rank1_closedform(&s).unwrap().rate, want) < 1e-12);
    }

    #[test]
    fn rank1_phases_beat_grid() {
        let s = aligned_geometry(2, 100).with_tx_power_dbm(0.0);
        let cs = ChannelSet::new(&s).unwrap();
        let sol = capacity_rank1_closedform(&s).unwrap();
        let rate = |g1: C64, g2: C64| {
            let h = effective_channel(&cs, &PhaseConfig::structured(g1, g2));
            optimal_covariance_detailed(&h, s.tx_power, s.noise_power).unwrap().rate
        };
        let at = rate(sol.gamma1, sol.gamma2);
        let n = 90;
        for i in 0..n {
            for j in 0..n {
                let g1 = C64::from_polar(1.0, 2.0 * PI * i as f64 / n as f64);
                let g2 = C64::from_polar(1.0, 2.0 * PI * j as f64 / n as f64);
                assert!(rate(g1, g2) <= at + 1e-4);
            }
        }
    }

    #[test]
    fn rank1_requires_matching_bs_responses() {
        assert!(matches!(capacity_rank1_closedform(&Scenario::reference()), Err(Error::Domain(_))));
    }

    #[test]
    fn single_irs_reference_value() {
        let s = Scenario::reference().with_tx_power_dbm(20.0);
        let c = single_irs_capacity(&s).unwrap();
        let want = (1.0 + 2.0 * 10f64.powf(-8.6) * 4.0 * 1e6 * 0.1 / (2501.0 * 1e-10)).log2();
        assert!((c - want).abs() < 1e-12);
        assert!((c - 13.0).abs() < 0.1, "{c}");
        let numeric = single_irs_numeric(&s).unwrap();
        assert!(rel(numeric, c) < 1e-8);
        let doubled = single_irs_capacity(&s.clone().with_total_elements(2000, 0.5).unwrap()).unwrap();
        assert!((doubled - c - 2.0).abs() < 0.01);
        assert_eq!(dbm_to_watts(20.0), s.tx_power);
    }

    #[test]
    fn single_irs_numeric_general_receivers() {
        let s = Scenario::reference().with_antennas(3, 3).with_tx_power_dbm(20.0).with_total_elements(200, 0.5).unwrap();
        let g = link_geometry(&s).unwrap();
        let snr = 9.0 * s.path_gain.powi(2) * 200f64.powi(2) * s.tx_power
            / ((g.distance(Link::R2) * g.distance(Link::T2)).powi(2) * s.noise_power);
        assert!(rel(single_irs_capacity(&s).unwrap(), (1.0 + snr).log2()) < 1e-8);
    }

    #[test]
    fn det_identity_on_orthogonal_geometry() {
        let s = orthogonal_geometry();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut values = Vec::new();
        for _ in 0..100 {
            let pc = PhaseConfig::structured(C64::from_polar(1.0, rng.gen_range(-PI..PI)), C64::from_polar(1.0, rng.gen_range(-PI..PI)));
            let (closed, numerical) = det_product_identity(&s, &pc).unwrap();
            assert!(rel(closed, numerical) < 1e-8);
            values.push(closed);
        }
        let max = values.iter().copied().fold(0.0, f64::max);
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        assert!((max - min) / max < 1e-9);
    }

    #[test]
    fn det_identity_vanishes_when_rank_one() {
        let s = aligned_geometry(3, 100);
        let (closed, numerical) = det_product_identity(&s, &PhaseConfig::unit()).unwrap();
        assert_eq!(closed, 0.0);
        let cs = ChannelSet::new(&s).unwrap();
        let h = effective_channel(&cs, &PhaseConfig::unit());
        let scale = (&h * h.adjoint()).norm().powi(2);
        assert!(numerical < 1e-12 * scale);
    }

    #[test]
    fn trace_identity_two_paths() {
        let s = Scenario::reference();
        let (a, b) = trace_identity(&s, &PhaseConfig::unit()).unwrap();
        assert!(rel(a, b) < 1e-10);
        let mut z = Scenario::reference();
        z.path_gain = 1e-300;
        let (a, b) = trace_identity(&z, &PhaseConfig::unit()).unwrap();
        assert!(a < 1e-290 && b < 1e-290);
    }

    #[test]
    fn rank1_trace_closed_form_handles_negative_cosine() {
        // user-side offset with cos(pi Theta_r) < 0
        let mut s = aligned_geometry(2, 100);
        s.antenna_spacing = 0.8 * s.wavelength;
        s.user.axis = Vec3::new(-0.6, 0.8, 0.0);
        let g = link_geometry(&s).unwrap();
        let (_, theta_r) = spatial_offsets(&s, &g);
        assert!((PI * theta_r).cos() < 0.0, "{theta_r}");
        let cs = ChannelSet::new(&s).unwrap();
        let sol = capacity_rank1_closedform(&s).unwrap();
        for pc in [PhaseConfig::unit(), PhaseConfig::structured(sol.gamma1, sol.gamma2)] {
            let h = effective_channel(&cs, &pc);
            let tr = (&h * h.adjoint()).trace().re;
            assert!(rel(rank1_trace_closed_form(&s, &pc).unwrap(), tr) < 1e-9);
        }
        let h = effective_channel(&cs, &PhaseConfig::structured(sol.gamma1, sol.gamma2));
        let tr = (&h * h.adjoint()).trace().re;
        assert!(rel((1.0 + s.tx_power * tr / s.noise_power).log2(), sol.rate) < 1e-9);
    }

    #[test]
    fn scaling_fit_examples() {
        let pts: Vec<(f64, f64)> = [250.0, 500.0, 1000.0, 2000.0].iter().map(|&m: &f64| (m, 4.0 * m.log2() + 1.0)).collect();
        let f = scaling_fit(&pts, ScalingAxis::Elements).unwrap();
        assert!((f.slope - 4.0).abs() < 1e-12);
        let p: Vec<(f64, f64)> = [0.01, 0.1, 1.0, 10.0].iter().map(|&x: &f64| (x, 2.0 * x.log2())).collect();
        assert!((scaling_fit(&p, ScalingAxis::Power).unwrap().slope - 2.0).abs() < 1e-9);
        assert!(scaling_fit(&pts[..2], ScalingAxis::Elements).is_err());
        let bad = [(1.0, 0.0), (2.0, 1.0), (3.0, 2.0)];
        assert!(scaling_fit(&bad, ScalingAxis::Elements).is_err());
        let decreasing = [(4.0, 0.0), (2.0, 1.0), (1.0, 2.0)];
        assert!(scaling_fit(&decreasing, ScalingAxis::Elements).is_err());
    }

    #[test]
    fn single_irs_slope_two() {
        let s = Scenario::reference().with_tx_power_dbm(20.0);
        let pts: Vec<(f64, f64)> = [250usize, 500, 1000, 2000]
            .iter()
            .map(|&m| (m as f64, single_irs_capacity(&s.clone().with_total_elements(m, 0.5).unwrap()).unwrap()))
            .collect();
        let f = scaling_fit(&pts, ScalingAxis::Elements).unwrap();
        assert!((f.slope - 2.0).abs() < 0.2, "{}", f.slope);
    }
}
