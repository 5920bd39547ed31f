use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::association::{qualification_floor_dbm, select_serving};
use super::radio::{db_to_linear, sinr_db_from_powers};
use super::{MobilityConfig, NetworkScenario};
use crate::error::{CopError, Result};

/// Outcome of one KPI evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct KpiReport {
    /// Arithmetic mean of `per_user_sinr_db`.
    pub mean_sinr_db: f64,
    /// SINR of every non-outage user in the data-gathering set.
    pub per_user_sinr_db: BTreeMap<u32, f64>,
    /// Serving sector of every user in the scenario; `None` is outage.
    pub serving: BTreeMap<u32, Option<u32>>,
    /// Summed capacity of the target sectors, `None` when a target sector
    /// has zero load.
    pub capacity: Option<f64>,
    pub sector_capacity: BTreeMap<u32, f64>,
    /// Users inside the gathering area that no sector qualifies for.
    pub outage_count: usize,
}

/// Mean SINR without the per-user breakdown.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanSinr {
    pub mean_sinr_db: f64,
    pub outage_count: usize,
}

/// One user's contribution to a sector's capacity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapacityTerm {
    pub traffic_demand: f64,
    pub sinr_linear: f64,
}

/// `prb_count - (1 / load) * sum(demand / log2(1 + sinr))`.
pub fn capacity(prb_count: f64, load: f64, terms: &[CapacityTerm]) -> Result<f64> {
    if load == 0.0 {
        return Err(CopError::Capacity("zero sector load".into()));
    }
    let mut used = 0.0;
    for t in terms {
        if !(t.sinr_linear > 0.0) {
            return Err(CopError::Capacity(format!(
                "non-positive linear SINR {}",
                t.sinr_linear
            )));
        }
        used += t.traffic_demand / (1.0 + t.sinr_linear).log2();
    }
    Ok(prb_count - used / load)
}

/// Precomputed link budget for repeated KPI evaluation of one scenario.
///
/// Received powers, per-serving-cell SINRs and gathering-area membership do
/// not depend on the mobility config, so they are computed once here; an
/// evaluation only redoes cell selection.
#[derive(Debug, Clone)]
pub struct Simulator<'a> {
    scenario: &'a NetworkScenario,
    n_sectors: usize,
    floor: f64,
    /// users x sectors, dBm
    rsrp: Vec<f64>,
    /// users x sectors: SINR (dB) if served by that sector
    sinr_db: Vec<f64>,
    in_area: Vec<bool>,
    is_target: Vec<bool>,
}

impl<'a> Simulator<'a> {
    pub fn new(scenario: &'a NetworkScenario) -> Self {
        let n_sectors = scenario.sectors.len();
        let mut rsrp = Vec::with_capacity(scenario.users.len() * n_sectors);
        let mut sinr_db = Vec::with_capacity(scenario.users.len() * n_sectors);
        for ue in &scenario.users {
            let row = scenario.rsrp_row(ue);
            for s in 0..n_sectors {
                let interferers = scenario
                    .sectors
                    .iter()
                    .zip(&row)
                    .enumerate()
                    .filter(|&(i, _)| i != s)
                    .map(|(_, (sector, &r))| (sector.load, r));
                sinr_db.push(sinr_db_from_powers(
                    row[s],
                    interferers,
                    scenario.constants.noise_power_dbm,
                ));
            }
            rsrp.extend(row);
        }
        Self {
            scenario,
            n_sectors,
            floor: qualification_floor_dbm(&scenario.constants),
            rsrp,
            sinr_db,
            in_area: scenario
                .users
                .iter()
                .map(|u| scenario.in_gathering_area(u))
                .collect(),
            is_target: scenario.sectors.iter().map(|s| s.is_target).collect(),
        }
    }

    pub fn scenario(&self) -> &NetworkScenario {
        self.scenario
    }

    /// Serving sector index per user, in user order.
    pub fn serving_indices(&self, config: &MobilityConfig) -> Vec<Option<usize>> {
        let (cio, hom) = self.scenario.offsets(config);
        self.rsrp
            .chunks_exact(self.n_sectors)
            .map(|row| select_serving(row, &cio, &hom, self.floor))
            .collect()
    }

    /// Visits every non-outage user of the data-gathering set in user order
    /// and returns the outage count inside the gathering area.
    fn gathered(
        &self,
        serving: &[Option<usize>],
        mut visit: impl FnMut(usize, usize, f64),
    ) -> usize {
        let mut outage = 0;
        for (u, s) in serving.iter().enumerate() {
            match *s {
                None => outage += usize::from(self.in_area[u]),
                Some(s) if self.is_target[s] || self.in_area[u] => {
                    visit(u, s, self.sinr_db[u * self.n_sectors + s])
                }
                Some(_) => {}
            }
        }
        outage
    }

    pub fn mean_sinr(&self, config: &MobilityConfig) -> Result<MeanSinr> {
        let serving = self.serving_indices(config);
        let (mut sum, mut n) = (0.0, 0usize);
        let outage_count = self.gathered(&serving, |_, _, sinr| {
            sum += sinr;
            n += 1;
        });
        if n == 0 {
            return Err(CopError::DegenerateKpi(format!(
                "no served user in the data-gathering set ({outage_count} in outage)"
            )));
        }
        Ok(MeanSinr {
            mean_sinr_db: sum / n as f64,
            outage_count,
        })
    }

    /// Users of the gathering area left in outage under `config`.
    pub fn outage_count(&self, config: &MobilityConfig) -> usize {
        self.gathered(&self.serving_indices(config), |_, _, _| {})
    }

    pub fn evaluate(&self, config: &MobilityConfig) -> Result<KpiReport> {
        let scenario = self.scenario;
        let serving = self.serving_indices(config);
        let mut per_user_sinr_db = BTreeMap::new();
        let mut sum = 0.0;
        let outage_count = self.gathered(&serving, |u, _, sinr| {
            per_user_sinr_db.insert(scenario.users[u].ue_id, sinr);
            sum += sinr;
        });
        if per_user_sinr_db.is_empty() {
            return Err(CopError::DegenerateKpi(format!(
                "no served user in the data-gathering set ({outage_count} in outage)"
            )));
        }

        let mut sector_capacity = BTreeMap::new();
        let mut total = Some(0.0);
        for t in scenario.target_indices() {
            let terms: Vec<CapacityTerm> = serving
                .iter()
                .enumerate()
                .filter(|(_, s)| **s == Some(t))
                .map(|(u, _)| CapacityTerm {
                    traffic_demand: scenario.users[u].traffic_demand,
                    sinr_linear: db_to_linear(self.sinr_db[u * self.n_sectors + t]),
                })
                .collect();
            let sector = &scenario.sectors[t];
            match capacity(f64::from(scenario.prb_count), sector.load, &terms) {
                Ok(c) => {
                    sector_capacity.insert(sector.sector_id, c);
                    total = total.map(|acc| acc + c);
                }
                Err(_) => total = None,
            }
        }
        if total.is_none() {
            sector_capacity.clear();
        }

        Ok(KpiReport {
            mean_sinr_db: sum / per_user_sinr_db.len() as f64,
            serving: scenario
                .users
                .iter()
                .zip(&serving)
                .map(|(u, s)| (u.ue_id, s.map(|i| scenario.sectors[i].sector_id)))
                .collect(),
            per_user_sinr_db,
            capacity: total,
            sector_capacity,
            outage_count,
        })
    }
}

impl KpiReport {
    /// One row per user: `ue_id,serving_sector_id,sinr_db`. The serving
    /// column is empty for outage, the SINR column for users outside the
    /// data-gathering set. A leading comment line carries the aggregates.
    pub fn to_csv_string(&self) -> String {
        let mut out = format!(
            "# copkit-kpi mean_sinr_db={:.6} outage_count={} capacity={}\n",
            self.mean_sinr_db,
            self.outage_count,
            self.capacity.map_or("none".into(), |c| format!("{c:.6}")),
        );
        out.push_str("ue_id,serving_sector_id,sinr_db\n");
        for (ue, serving) in &self.serving {
            let s = serving.map(|s| s.to_string()).unwrap_or_default();
            let sinr = self
                .per_user_sinr_db
                .get(ue)
                .map(|v| format!("{v:.6}"))
                .unwrap_or_default();
            let _ = writeln!(out, "{ue},{s},{sinr}");
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_csv_string()).map_err(|e| CopError::io(path, e))
    }
}

impl NetworkScenario {
    /// Runs association and SINR for every user and averages over the
    /// data-gathering set: users served by a target sector plus users inside
    /// the gathering disk.
    pub fn evaluate_kpi(&self, config: &MobilityConfig) -> Result<KpiReport> {
        Simulator::new(self).evaluate(config)
    }
}
