//! Snapshot network model: cells, users, CIO/HOM-aware association and the
//! mean-SINR KPI.
//!
//! Everything here is a pure function of an immutable [`NetworkScenario`].
//! Randomness only enters through [`generate_scenario`].

mod association;
mod io;
mod kpi;
mod layout;
mod radio;

use serde::{Deserialize, Serialize};

use crate::error::{CopError, Result};

pub use association::{qualification_floor_dbm, AssociationResult};
pub use kpi::{capacity, CapacityTerm, KpiReport, MeanSinr, Simulator};
pub use layout::{generate_scenario, LayoutParams};
pub use radio::{db_to_linear, linear_to_db, log_distance_path_loss_db, sinr_db_from_powers};

/// Allowed CIO range in dB, inclusive.
pub const CIO_RANGE: (f64, f64) = (-10.0, 10.0);
/// Allowed HOM range in dB, inclusive.
pub const HOM_RANGE: (f64, f64) = (0.0, 10.0);
/// Number of target sectors whose CIO/HOM is tuned.
pub const N_TARGETS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Compass bearing from `self` towards `other`: 0° is +y, clockwise.
    pub fn bearing_deg(&self, other: &Point) -> f64 {
        (other.x - self.x)
            .atan2(other.y - self.y)
            .to_degrees()
            .rem_euclid(360.0)
    }
}

/// Link-budget constants shared by every sector of a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadioConstants {
    pub carrier_frequency_mhz: f64,
    /// Per-sector transmit power.
    pub tx_power_dbm: f64,
    /// Main-lobe antenna gain.
    pub antenna_gain_dbi: f64,
    /// Minimum RSRP a cell requires before it may be selected.
    pub min_rsrp_dbm: f64,
    /// Cell selection threshold added on top of `min_rsrp_dbm`.
    pub selection_threshold_db: f64,
    pub noise_power_dbm: f64,
    pub pathloss_exponent: f64,
    /// Loss at `ref_distance_m`.
    pub pathloss_ref_db: f64,
    pub ref_distance_m: f64,
    /// Width of the sector main lobe.
    #[serde(default = "default_beamwidth")]
    pub beamwidth_deg: f64,
    /// Attenuation applied outside the main lobe.
    #[serde(default = "default_side_lobe")]
    pub side_lobe_attenuation_db: f64,
}

fn default_beamwidth() -> f64 {
    120.0
}

fn default_side_lobe() -> f64 {
    20.0
}

impl Default for RadioConstants {
    fn default() -> Self {
        Self {
            carrier_frequency_mhz: 2100.0,
            tx_power_dbm: 43.0,
            antenna_gain_dbi: 18.5,
            min_rsrp_dbm: -140.0,
            selection_threshold_db: 0.0,
            // thermal -174 dBm/Hz over 10 MHz plus a 9 dB noise figure
            noise_power_dbm: -95.0,
            pathloss_exponent: 3.5,
            // free-space loss at 1 m for 2.1 GHz
            pathloss_ref_db: 34.5,
            ref_distance_m: 1.0,
            beamwidth_deg: default_beamwidth(),
            side_lobe_attenuation_db: default_side_lobe(),
        }
    }
}

impl RadioConstants {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.carrier_frequency_mhz,
            self.tx_power_dbm,
            self.antenna_gain_dbi,
            self.min_rsrp_dbm,
            self.selection_threshold_db,
            self.noise_power_dbm,
            self.pathloss_exponent,
            self.pathloss_ref_db,
            self.ref_distance_m,
            self.beamwidth_deg,
            self.side_lobe_attenuation_db,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(CopError::Config("radio constants must be finite".into()));
        }
        if self.carrier_frequency_mhz <= 0.0 {
            return Err(CopError::Config("carrier frequency must be positive".into()));
        }
        if self.tx_power_dbm <= self.min_rsrp_dbm {
            return Err(CopError::Config(
                "tx power must exceed the minimum RSRP".into(),
            ));
        }
        if self.noise_power_dbm >= self.tx_power_dbm {
            return Err(CopError::Config("noise power must be below tx power".into()));
        }
        if self.selection_threshold_db < 0.0 {
            return Err(CopError::Config(
                "selection threshold must be non-negative".into(),
            ));
        }
        if self.pathloss_exponent <= 2.0 {
            return Err(CopError::Config("path loss exponent must exceed 2".into()));
        }
        if self.ref_distance_m <= 0.0 {
            return Err(CopError::Config("reference distance must be positive".into()));
        }
        if !(self.beamwidth_deg > 0.0 && self.beamwidth_deg <= 360.0) {
            return Err(CopError::Config("beamwidth must be in (0, 360]".into()));
        }
        if self.side_lobe_attenuation_db < 0.0 {
            return Err(CopError::Config(
                "side lobe attenuation must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sector {
    pub sector_id: u32,
    pub site_position: Point,
    pub azimuth_deg: f64,
    pub is_target: bool,
    /// Resource utilisation in [0, 1]; scales this sector's interference.
    pub load: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserEquipment {
    pub ue_id: u32,
    pub position: Point,
    pub traffic_demand: f64,
}

/// Axis-aligned rectangle users live in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub min: Point,
    pub max: Point,
}

impl Region {
    pub fn contains(&self, p: &Point) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }
}

/// The six tunable mobility parameters: CIO and HOM of the three target
/// sectors, in ascending sector-id order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MobilityConfig {
    pub cio_db: [f64; 3],
    pub hom_db: [f64; 3],
}

impl Default for MobilityConfig {
    fn default() -> Self {
        Self {
            cio_db: [0.0; 3],
            hom_db: [0.0; 3],
        }
    }
}

impl MobilityConfig {
    pub fn new(cio_db: [f64; 3], hom_db: [f64; 3]) -> Result<Self> {
        let config = Self { cio_db, hom_db };
        config.validate()?;
        Ok(config)
    }

    /// Builds a config from `(cio1, cio2, cio3, hom1, hom2, hom3)`.
    pub fn from_genes(genes: [f64; 6]) -> Result<Self> {
        Self::new(
            [genes[0], genes[1], genes[2]],
            [genes[3], genes[4], genes[5]],
        )
    }

    /// Like [`MobilityConfig::from_genes`] but clamps into range instead of
    /// failing. The flag reports whether anything was clamped.
    pub fn from_genes_clamped(genes: [f64; 6]) -> (Self, bool) {
        let mut clamped = false;
        let mut fix = |v: f64, (lo, hi): (f64, f64)| {
            let c = if v.is_nan() { lo } else { v.clamp(lo, hi) };
            if c != v {
                clamped = true;
            }
            c
        };
        let config = Self {
            cio_db: [
                fix(genes[0], CIO_RANGE),
                fix(genes[1], CIO_RANGE),
                fix(genes[2], CIO_RANGE),
            ],
            hom_db: [
                fix(genes[3], HOM_RANGE),
                fix(genes[4], HOM_RANGE),
                fix(genes[5], HOM_RANGE),
            ],
        };
        (config, clamped)
    }

    pub fn genes(&self) -> [f64; 6] {
        [
            self.cio_db[0],
            self.cio_db[1],
            self.cio_db[2],
            self.hom_db[0],
            self.hom_db[1],
            self.hom_db[2],
        ]
    }

    pub fn validate(&self) -> Result<()> {
        for &value in &self.cio_db {
            check_range("cio_db", value, CIO_RANGE)?;
        }
        for &value in &self.hom_db {
            check_range("hom_db", value, HOM_RANGE)?;
        }
        Ok(())
    }
}

fn check_range(name: &'static str, value: f64, (min, max): (f64, f64)) -> Result<()> {
    if value >= min && value <= max {
        Ok(())
    } else {
        Err(CopError::OutOfRange {
            name,
            value,
            min,
            max,
        })
    }
}

/// A fixed network snapshot.
///
/// Sectors are kept sorted by `sector_id`; sector *indices* used by the
/// simulator follow that order, so "lowest index" and "lowest id" coincide.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkScenario {
    pub rng_seed: u64,
    /// CIO applied to every non-target sector.
    pub non_target_cio_db: f64,
    /// HOM applied to every non-target sector.
    pub non_target_hom_db: f64,
    /// Physical resource blocks per sector.
    pub prb_count: u32,
    /// Radius of the data-gathering disk around the target sites.
    pub gathering_radius_m: f64,
    pub region: Region,
    pub constants: RadioConstants,
    pub sectors: Vec<Sector>,
    pub users: Vec<UserEquipment>,
}

impl NetworkScenario {
    /// Validates and normalises (sorts sectors and users by id).
    pub fn normalized(mut self) -> Result<Self> {
        self.sectors.sort_by_key(|s| s.sector_id);
        self.users.sort_by_key(|u| u.ue_id);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        self.constants.validate()?;
        if self.sectors.is_empty() {
            return Err(CopError::Config("scenario has no sectors".into()));
        }
        if self.users.is_empty() {
            return Err(CopError::Config("scenario has no users".into()));
        }
        if self.prb_count == 0 {
            return Err(CopError::Config("prb_count must be positive".into()));
        }
        if !(self.gathering_radius_m >= 0.0) {
            return Err(CopError::Config(
                "gathering radius must be non-negative".into(),
            ));
        }
        if !(self.non_target_cio_db.is_finite() && self.non_target_hom_db.is_finite()) {
            return Err(CopError::Config("non-target CIO/HOM must be finite".into()));
        }
        for pair in self.sectors.windows(2) {
            if pair[0].sector_id >= pair[1].sector_id {
                return Err(CopError::Config(format!(
                    "sector ids must be unique and sorted (at {})",
                    pair[1].sector_id
                )));
            }
        }
        for pair in self.users.windows(2) {
            if pair[0].ue_id >= pair[1].ue_id {
                return Err(CopError::Config(format!(
                    "ue ids must be unique and sorted (at {})",
                    pair[1].ue_id
                )));
            }
        }
        let targets = self.target_indices();
        if targets.len() > N_TARGETS {
            return Err(CopError::Config(format!(
                "at most {N_TARGETS} target sectors are supported, found {}",
                targets.len()
            )));
        }
        for s in &self.sectors {
            if !(0.0..=1.0).contains(&s.load) {
                return Err(CopError::Config(format!(
                    "sector {} load {} outside [0, 1]",
                    s.sector_id, s.load
                )));
            }
            if !(0.0..360.0).contains(&s.azimuth_deg) {
                return Err(CopError::Config(format!(
                    "sector {} azimuth {} outside [0, 360)",
                    s.sector_id, s.azimuth_deg
                )));
            }
        }
        for u in &self.users {
            if !(u.traffic_demand > 0.0) {
                return Err(CopError::Config(format!(
                    "user {} traffic demand must be positive",
                    u.ue_id
                )));
            }
            if !self.region.contains(&u.position) {
                return Err(CopError::Config(format!(
                    "user {} lies outside the scenario region",
                    u.ue_id
                )));
            }
        }
        Ok(())
    }

    /// Indices into `sectors` of the target sectors, ascending.
    pub fn target_indices(&self) -> Vec<usize> {
        self.sectors
            .iter()
            .enumerate()
            .filter(|(_, s)| s.is_target)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn sector_index(&self, sector_id: u32) -> Option<usize> {
        self.sectors
            .binary_search_by_key(&sector_id, |s| s.sector_id)
            .ok()
    }

    pub fn user_index(&self, ue_id: u32) -> Option<usize> {
        self.users.binary_search_by_key(&ue_id, |u| u.ue_id).ok()
    }

    /// Per-sector CIO and HOM under `config`. Target sectors take the
    /// config values in ascending id order, all others the fixed defaults.
    pub fn offsets(&self, config: &MobilityConfig) -> (Vec<f64>, Vec<f64>) {
        let mut cio = vec![self.non_target_cio_db; self.sectors.len()];
        let mut hom = vec![self.non_target_hom_db; self.sectors.len()];
        for (k, idx) in self.target_indices().into_iter().enumerate() {
            cio[idx] = config.cio_db[k];
            hom[idx] = config.hom_db[k];
        }
        (cio, hom)
    }

    /// Centroid of the target sites, or `None` without targets.
    pub fn gathering_center(&self) -> Option<Point> {
        let targets = self.target_indices();
        if targets.is_empty() {
            return None;
        }
        let n = targets.len() as f64;
        let (sx, sy) = targets.iter().fold((0.0, 0.0), |(x, y), &i| {
            let p = self.sectors[i].site_position;
            (x + p.x, y + p.y)
        });
        Some(Point::new(sx / n, sy / n))
    }

    /// Whether a user sits inside the fixed data-gathering disk.
    pub fn in_gathering_area(&self, ue: &UserEquipment) -> bool {
        self.gathering_center()
            .is_some_and(|c| c.distance(&ue.position) <= self.gathering_radius_m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mobility_config_ranges() {
        assert!(MobilityConfig::new([-10.0, 10.0, 0.0], [0.0, 10.0, 5.0]).is_ok());
        assert!(MobilityConfig::new([-10.5, 0.0, 0.0], [0.0; 3]).is_err());
        assert!(MobilityConfig::new([0.0; 3], [-0.1, 0.0, 0.0]).is_err());
        assert!(MobilityConfig::new([f64::NAN, 0.0, 0.0], [0.0; 3]).is_err());
    }

    #[test]
    fn clamped_genes() {
        let (c, clamped) = MobilityConfig::from_genes_clamped([-11.0, 0.0, 3.0, 12.0, 1.0, -1.0]);
        assert!(clamped);
        assert_eq!(c.genes(), [-10.0, 0.0, 3.0, 10.0, 1.0, 0.0]);
        let (_, clamped) = MobilityConfig::from_genes_clamped([0.0; 6]);
        assert!(!clamped);
    }

    #[test]
    fn bearing_is_compass() {
        let o = Point::new(0.0, 0.0);
        assert!((o.bearing_deg(&Point::new(0.0, 1.0)) - 0.0).abs() < 1e-12);
        assert!((o.bearing_deg(&Point::new(1.0, 0.0)) - 90.0).abs() < 1e-12);
        assert!((o.bearing_deg(&Point::new(0.0, -1.0)) - 180.0).abs() < 1e-12);
        assert!((o.bearing_deg(&Point::new(-1.0, 0.0)) - 270.0).abs() < 1e-12);
    }

    #[test]
    fn default_constants_are_valid() {
        RadioConstants::default().validate().unwrap();
        let bad = RadioConstants {
            pathloss_exponent: 2.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = RadioConstants {
            noise_power_dbm: 50.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
