use super::{NetworkScenario, Point, RadioConstants, Sector, UserEquipment};

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

/// Log-distance path loss. Distances below the reference distance are
/// clamped to it.
pub fn log_distance_path_loss_db(constants: &RadioConstants, distance_m: f64) -> f64 {
    let d = distance_m.max(constants.ref_distance_m);
    constants.pathloss_ref_db
        + 10.0 * constants.pathloss_exponent * (d / constants.ref_distance_m).log10()
}

/// SINR in dB from received powers in dBm.
///
/// `interferers` yields `(load, received_dbm)` pairs. The sum is formed in
/// the linear (mW) domain.
pub fn sinr_db_from_powers(
    serving_dbm: f64,
    interferers: impl IntoIterator<Item = (f64, f64)>,
    noise_dbm: f64,
) -> f64 {
    let interference: f64 = interferers
        .into_iter()
        .map(|(load, dbm)| load * db_to_linear(dbm))
        .sum();
    linear_to_db(db_to_linear(serving_dbm) / (interference + db_to_linear(noise_dbm)))
}

fn angular_distance_deg(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(360.0);
    d.min(360.0 - d)
}

impl NetworkScenario {
    pub fn path_loss_db(&self, sector: &Sector, position: Point) -> f64 {
        log_distance_path_loss_db(
            &self.constants,
            sector.site_position.distance(&position),
        )
    }

    /// Antenna gain towards `position`: full gain inside the main lobe
    /// (boundary included), attenuated outside.
    pub fn antenna_gain_dbi(&self, sector: &Sector, position: Point) -> f64 {
        let c = &self.constants;
        let bearing = sector.site_position.bearing_deg(&position);
        if angular_distance_deg(bearing, sector.azimuth_deg) <= c.beamwidth_deg / 2.0 {
            c.antenna_gain_dbi
        } else {
            c.antenna_gain_dbi - c.side_lobe_attenuation_db
        }
    }

    pub fn rsrp_dbm(&self, sector: &Sector, ue: &UserEquipment) -> f64 {
        self.constants.tx_power_dbm + self.antenna_gain_dbi(sector, ue.position)
            - self.path_loss_db(sector, ue.position)
    }

    /// RSRP from every sector, in sector order.
    pub fn rsrp_row(&self, ue: &UserEquipment) -> Vec<f64> {
        self.sectors.iter().map(|s| self.rsrp_dbm(s, ue)).collect()
    }
}
