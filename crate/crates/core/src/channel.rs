//! Radio channel models.
//!
//! Air-to-ground links (base station or UAV to a ground user) use a
//! probabilistic LoS/NLoS path loss whose LoS probability is a sigmoid of the
//! elevation angle. Links between two airborne nodes (UAV to UAV, and the UAV
//! to base-station backhaul) use free-space path loss at the air-to-air carrier.
//!
//! All dB/linear conversions live here; the rest of the crate works with
//! linear SNR and rates in bit/s.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
    /// Altitude; ground users sit at zero.
    pub z: f64,
}

impl Position {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn ground(x: f64, y: f64) -> Self {
        Self { x, y, z: 0.0 }
    }

    pub fn distance(&self, other: &Position) -> f64 {
        let (dx, dy, dz) = (self.x - other.x, self.y - other.y, self.z - other.z);
        (dx * dx + dy * dy + dz * dz).sqrt()
    }

    pub fn horizontal_distance(&self, other: &Position) -> f64 {
        let (dx, dy) = (self.x - other.x, self.y - other.y);
        (dx * dx + dy * dy).sqrt()
    }

    pub fn is_valid(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite() && self.z >= 0.0
    }
}

/// Transmit power per link class, mW.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TxPower {
    /// Base station to ground user.
    pub direct_mw: f64,
    /// UAV to ground user.
    pub fronthaul_mw: f64,
    /// UAV to UAV and base station to UAV.
    pub backhaul_mw: f64,
}

impl TxPower {
    pub fn uniform(mw: f64) -> Self {
        Self {
            direct_mw: mw,
            fronthaul_mw: mw,
            backhaul_mw: mw,
        }
    }
}

/// Channel constants, powers, bandwidths and thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadioParams {
    pub theta_env: f64,
    pub xi_env: f64,
    /// Path-loss exponent of the air-to-ground model.
    pub delta_exp: f64,
    pub eta_los_db: f64,
    pub eta_nlos_db: f64,
    /// Carrier for links that terminate at a ground user.
    pub f_access_hz: f64,
    /// Carrier for air-to-air (backhaul) links.
    pub f_a2a_hz: f64,
    pub c_mps: f64,
    pub tx_power_mw: TxPower,
    pub noise_mw: f64,
    /// UAV to user bandwidth.
    pub bw_access_hz: f64,
    /// Bandwidth of every link with the base station, and of UAV to UAV hops.
    pub bw_bs_hz: f64,
    /// Linear SNR threshold.
    pub snr_threshold: f64,
    /// Maximum range of any link that involves a UAV, same unit as positions.
    pub comm_range_m: f64,
    /// Link distances below this are clamped up to it.
    pub min_distance_m: f64,
}

impl Default for RadioParams {
    fn default() -> Self {
        Self {
            theta_env: 4.88,
            xi_env: 0.43,
            delta_exp: 2.0,
            eta_los_db: 0.1,
            eta_nlos_db: 21.0,
            f_access_hz: 2.0e9,
            f_a2a_hz: 2.4e9,
            c_mps: SPEED_OF_LIGHT,
            tx_power_mw: TxPower::uniform(dbm_to_mw(30.0)),
            noise_mw: dbm_to_mw(-96.0),
            bw_access_hz: 25.0e6,
            bw_bs_hz: 25.0e6,
            snr_threshold: 3.0,
            comm_range_m: 500.0,
            min_distance_m: 1.0,
        }
    }
}

impl RadioParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("f_access_hz", self.f_access_hz),
            ("f_a2a_hz", self.f_a2a_hz),
            ("c_mps", self.c_mps),
            ("tx_power_direct", self.tx_power_mw.direct_mw),
            ("tx_power_fronthaul", self.tx_power_mw.fronthaul_mw),
            ("tx_power_backhaul", self.tx_power_mw.backhaul_mw),
            ("noise", self.noise_mw),
            ("bw_access_hz", self.bw_access_hz),
            ("bw_bs_hz", self.bw_bs_hz),
            ("snr_threshold", self.snr_threshold),
            ("comm_range", self.comm_range_m),
            ("min_distance_m", self.min_distance_m),
            ("theta_env", self.theta_env),
            ("xi_env", self.xi_env),
        ];
        for (key, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::config(key, format!("must be finite and > 0, got {value}")));
            }
        }
        if !(self.delta_exp.is_finite() && self.delta_exp >= 1.0) {
            return Err(Error::config(
                "delta_exp",
                format!("must be >= 1, got {}", self.delta_exp),
            ));
        }
        if !(self.eta_los_db.is_finite() && self.eta_los_db >= 0.0) {
            return Err(Error::config(
                "eta_los_db",
                format!("must be >= 0, got {}", self.eta_los_db),
            ));
        }
        if !(self.eta_nlos_db.is_finite() && self.eta_nlos_db >= self.eta_los_db) {
            return Err(Error::config(
                "eta_nlos_db",
                format!(
                    "must be >= eta_los_db ({}), got {}",
                    self.eta_los_db, self.eta_nlos_db
                ),
            ));
        }
        Ok(())
    }

    /// Clamp a raw distance to the numerical floor.
    pub fn floor_distance(&self, d: f64) -> f64 {
        d.max(self.min_distance_m)
    }
}

pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

pub fn mw_to_dbm(mw: f64) -> f64 {
    10.0 * mw.log10()
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(ratio: f64) -> f64 {
    10.0 * ratio.log10()
}

/// Probability of a line-of-sight path at elevation `elevation_rad`.
///
/// `1 / (1 + θ·exp(−ξ·(180/π)·φ + θ))`: small near the horizon and
/// approaching one for a vertical link.
pub fn los_probability(elevation_rad: f64, params: &RadioParams) -> Result<f64> {
    if !(0.0..=PI / 2.0).contains(&elevation_rad) {
        return Err(Error::Domain(format!(
            "elevation angle {elevation_rad} rad outside [0, pi/2]"
        )));
    }
    let degrees = elevation_rad * (180.0 / PI);
    let exponent = -params.xi_env * degrees + params.theta_env;
    Ok(1.0 / (1.0 + params.theta_env * exponent.exp()))
}

/// Elevation of the line between `a` and `b` seen from the lower endpoint.
pub fn elevation_angle(a: &Position, b: &Position) -> f64 {
    let horizontal = a.horizontal_distance(b);
    if horizontal == 0.0 {
        return PI / 2.0;
    }
    (a.z - b.z).abs().atan2(horizontal)
}

// 10·exponent·log10(4π·f·d/c); shared by both path-loss models.
fn free_space_term_db(exponent: f64, freq_hz: f64, d_m: f64, c_mps: f64) -> f64 {
    10.0 * exponent * (4.0 * PI * freq_hz * d_m / c_mps).log10()
}

fn check_distance(d_m: f64) -> Result<()> {
    if d_m.is_finite() && d_m > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("link distance must be > 0, got {d_m}")))
    }
}

/// Mean air-to-ground path loss in dB, averaged over LoS and NLoS conditions.
pub fn atg_path_loss_db(d_m: f64, elevation_rad: f64, params: &RadioParams) -> Result<f64> {
    check_distance(d_m)?;
    let p_los = los_probability(elevation_rad, params)?;
    let p_nlos = 1.0 - p_los;
    let free_space = free_space_term_db(params.delta_exp, params.f_access_hz, d_m, params.c_mps);
    Ok(free_space + p_los * params.eta_los_db + p_nlos * params.eta_nlos_db)
}

/// Free-space path loss of an air-to-air link, dB.
pub fn fspl_db(d_m: f64, params: &RadioParams) -> Result<f64> {
    check_distance(d_m)?;
    Ok(free_space_term_db(2.0, params.f_a2a_hz, d_m, params.c_mps))
}

/// Received power over noise, both in mW.
pub fn snr_linear(tx_mw: f64, path_loss_db: f64, noise_mw: f64) -> f64 {
    let received_mw = tx_mw / 10f64.powf(path_loss_db / 10.0);
    received_mw / noise_mw
}

pub fn shannon_rate_bps(bandwidth_hz: f64, snr: f64) -> f64 {
    bandwidth_hz * (1.0 + snr).log2()
}

/// The three physical link classes of the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinkClass {
    /// Base station to ground user (air-to-ground model, direct power).
    Direct,
    /// UAV to ground user (air-to-ground model, fronthaul power).
    Fronthaul,
    /// UAV to UAV, or base station to UAV (free space, backhaul power).
    Backhaul,
}

/// Linear SNR of a link between `a` and `b`. Distances are floored; range
/// gating is the caller's concern.
pub fn link_snr(class: LinkClass, a: &Position, b: &Position, params: &RadioParams) -> f64 {
    let d = params.floor_distance(a.distance(b));
    let (tx_mw, path_loss) = match class {
        LinkClass::Direct | LinkClass::Fronthaul => {
            let elevation = elevation_angle(a, b);
            let tx = if class == LinkClass::Direct {
                params.tx_power_mw.direct_mw
            } else {
                params.tx_power_mw.fronthaul_mw
            };
            // d is floored positive and elevation is in [0, pi/2] by construction
            (tx, atg_path_loss_db(d, elevation, params).expect("valid link geometry"))
        }
        LinkClass::Backhaul => (
            params.tx_power_mw.backhaul_mw,
            fspl_db(d, params).expect("floored distance is positive"),
        ),
    };
    snr_linear(tx_mw, path_loss, params.noise_mw)
}

/// Shannon rate of a link class at the given SNR, using the bandwidth the
/// class is allotted.
pub fn link_rate_bps(class: LinkClass, snr: f64, params: &RadioParams) -> f64 {
    let bandwidth = match class {
        LinkClass::Fronthaul => params.bw_access_hz,
        LinkClass::Direct | LinkClass::Backhaul => params.bw_bs_hz,
    };
    shannon_rate_bps(bandwidth, snr)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn los_probability_limits() {
        let p = RadioParams::default();
        let vertical = los_probability(PI / 2.0, &p).unwrap();
        assert!(vertical < 1.0 && 1.0 - vertical < 1e-10);
        let horizon = los_probability(0.0, &p).unwrap();
        let expected = 1.0 / (1.0 + 4.88 * 4.88f64.exp());
        assert!(close(horizon, expected, 1e-15));
        assert!(close(horizon, 1.555e-3, 1e-6));
    }

    #[test]
    fn los_probability_rejects_out_of_range_angles() {
        let p = RadioParams::default();
        assert!(matches!(los_probability(-0.01, &p), Err(Error::Domain(_))));
        assert!(matches!(los_probability(PI / 2.0 + 1e-9, &p), Err(Error::Domain(_))));
        assert!(los_probability(f64::NAN, &p).is_err());
    }

    #[test]
    fn elevation_examples() {
        let ground = Position::ground(0.0, 0.0);
        assert!(close(
            elevation_angle(&ground, &Position::new(100.0, 0.0, 100.0)),
            PI / 4.0,
            1e-15
        ));
        assert_eq!(elevation_angle(&ground, &Position::new(0.0, 0.0, 100.0)), PI / 2.0);
        assert_eq!(elevation_angle(&ground, &Position::ground(30.0, 40.0)), 0.0);
    }

    #[test]
    fn free_space_arithmetic() {
        let p = RadioParams::default();
        let unit = p.c_mps / (4.0 * PI * p.f_a2a_hz);
        assert!(close(fspl_db(unit, &p).unwrap(), 0.0, 1e-12));
        let d = 37.0;
        assert!(close(fspl_db(10.0 * d, &p).unwrap() - fspl_db(d, &p).unwrap(), 20.0, 1e-12));
        assert!(fspl_db(0.0, &p).is_err());
        assert!(atg_path_loss_db(-1.0, 0.3, &p).is_err());
    }

    #[test]
    fn atg_exponent_two_is_twenty_log() {
        let p = RadioParams::default();
        let d = 123.4;
        let phi = 0.7;
        let p_los = los_probability(phi, &p).unwrap();
        let expected = 20.0 * (4.0 * PI * p.f_access_hz * d / p.c_mps).log10()
            + p_los * p.eta_los_db
            + (1.0 - p_los) * p.eta_nlos_db;
        assert_eq!(atg_path_loss_db(d, phi, &p).unwrap(), expected);

        let doubled = atg_path_loss_db(2.0 * d, phi, &p).unwrap() - atg_path_loss_db(d, phi, &p).unwrap();
        assert!(close(doubled, 20.0 * 2f64.log10(), 1e-12));
        assert!(close(doubled, 6.0206, 1e-4));
    }

    #[test]
    fn atg_vertical_limit_adds_los_excess() {
        let p = RadioParams::default();
        let d = 100.0;
        let free_space = 20.0 * (4.0 * PI * p.f_access_hz * d / p.c_mps).log10();
        let total = atg_path_loss_db(d, PI / 2.0, &p).unwrap();
        assert!(close(total - free_space, 0.1, 1e-9));
    }

    #[test]
    fn snr_examples() {
        assert_eq!(snr_linear(1.0, 0.0, 1.0), 1.0);
        assert!(close(snr_linear(1000.0, 30.0, 1.0), 1.0, 1e-12));
        let snr = snr_linear(1000.0, 90.0, dbm_to_mw(-96.0));
        assert!(close(snr, 10f64.powf(3.6), 1e-9));
        assert!(close(snr, 3981.07, 0.01));
    }

    #[test]
    fn shannon_examples() {
        assert_eq!(shannon_rate_bps(25e6, 1.0), 25e6);
        assert_eq!(shannon_rate_bps(25e6, 0.0), 0.0);
        assert_eq!(shannon_rate_bps(25e6, 3.0), 50e6);
    }

    #[test]
    fn dbm_roundtrip() {
        assert!(close(mw_to_dbm(dbm_to_mw(-96.0)), -96.0, 1e-12));
        assert!(close(linear_to_db(db_to_linear(4.77)), 4.77, 1e-12));
        assert_eq!(dbm_to_mw(30.0), 1000.0);
    }

    #[test]
    fn default_params_are_valid() {
        RadioParams::default().validate().unwrap();
        let mut p = RadioParams::default();
        p.eta_nlos_db = 0.05;
        match p.validate() {
            Err(Error::Config { key, .. }) => assert_eq!(key, "eta_nlos_db"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn link_snr_floors_distance() {
        let p = RadioParams::default();
        let a = Position::new(5.0, 5.0, 100.0);
        let same = link_snr(LinkClass::Backhaul, &a, &a, &p);
        let one_metre = link_snr(LinkClass::Backhaul, &a, &Position::new(5.0, 5.0, 101.0), &p);
        assert!(same.is_finite());
        assert_eq!(same, one_metre);
    }
}
