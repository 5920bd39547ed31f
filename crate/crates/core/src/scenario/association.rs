use std::collections::{BTreeMap, BTreeSet};

use super::{radio, MobilityConfig, NetworkScenario, RadioConstants, UserEquipment};
use crate::error::{CopError, Result};

/// RSRP a cell must reach to qualify as a serving candidate.
pub fn qualification_floor_dbm(constants: &RadioConstants) -> f64 {
    constants.min_rsrp_dbm + constants.selection_threshold_db.max(0.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssociationResult {
    pub ue_id: u32,
    /// `None` marks outage: no sector qualified.
    pub serving_sector_id: Option<u32>,
    /// Strongest qualified sector before offsets are applied.
    pub preselected_sector_id: Option<u32>,
    pub rsrp_by_sector_dbm: BTreeMap<u32, f64>,
    pub qualified_sector_ids: BTreeSet<u32>,
}

impl AssociationResult {
    pub fn is_outage(&self) -> bool {
        self.serving_sector_id.is_none()
    }
}

/// Index of the qualified sector with the highest RSRP (lowest index wins
/// ties).
pub(crate) fn preselect(rsrp: &[f64], floor: f64) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &r) in rsrp.iter().enumerate() {
        if r >= floor && best.is_none_or(|b| r > rsrp[b]) {
            best = Some(i);
        }
    }
    best
}

/// Final serving-cell selection over sector indices.
///
/// A candidate other than the preselected cell `s0` takes over when
/// `rsrp[c] + cio[c] >= rsrp[s0] + cio[s0] + hom[s0]`; among several, the
/// largest `rsrp + cio` wins (lowest index on ties). Otherwise `s0` serves.
pub(crate) fn select_serving(
    rsrp: &[f64],
    cio: &[f64],
    hom: &[f64],
    floor: f64,
) -> Option<usize> {
    let s0 = preselect(rsrp, floor)?;
    Some(final_select(rsrp, cio, hom, floor, s0))
}

/// Final selection given the preselected cell `s0`.
pub(crate) fn final_select(rsrp: &[f64], cio: &[f64], hom: &[f64], floor: f64, s0: usize) -> usize {
    let bar = rsrp[s0] + cio[s0] + hom[s0];
    let mut best: Option<(usize, f64)> = None;
    for (c, &r) in rsrp.iter().enumerate() {
        if c == s0 || r < floor {
            continue;
        }
        let score = r + cio[c];
        if score >= bar && best.is_none_or(|(_, b)| score > b) {
            best = Some((c, score));
        }
    }
    best.map_or(s0, |(c, _)| c)
}

impl NetworkScenario {
    /// Sector ids whose RSRP reaches the qualification floor. `rsrp` is
    /// indexed like `self.sectors`.
    pub fn qualify(&self, rsrp: &[f64]) -> BTreeSet<u32> {
        let floor = qualification_floor_dbm(&self.constants);
        self.sectors
            .iter()
            .zip(rsrp)
            .filter(|(_, &r)| r >= floor)
            .map(|(s, _)| s.sector_id)
            .collect()
    }

    pub fn associate(&self, config: &MobilityConfig, ue: &UserEquipment) -> AssociationResult {
        let rsrp = self.rsrp_row(ue);
        let (cio, hom) = self.offsets(config);
        let floor = qualification_floor_dbm(&self.constants);
        let id = |i: usize| self.sectors[i].sector_id;
        AssociationResult {
            ue_id: ue.ue_id,
            serving_sector_id: select_serving(&rsrp, &cio, &hom, floor).map(id),
            preselected_sector_id: preselect(&rsrp, floor).map(id),
            qualified_sector_ids: self.qualify(&rsrp),
            rsrp_by_sector_dbm: self
                .sectors
                .iter()
                .zip(&rsrp)
                .map(|(s, &r)| (s.sector_id, r))
                .collect(),
        }
    }

    /// SINR of an associated user, computed from the received powers stored
    /// in the association. Every sector other than the serving one
    /// interferes, weighted by its load.
    pub fn sinr_db(&self, association: &AssociationResult) -> Result<f64> {
        let serving = association.serving_sector_id.ok_or(CopError::NoSinr {
            ue_id: association.ue_id,
        })?;
        let power = |id: u32| {
            association
                .rsrp_by_sector_dbm
                .get(&id)
                .copied()
                .ok_or_else(|| CopError::Config(format!("no RSRP for sector {id}")))
        };
        let serving_dbm = power(serving)?;
        let interferers = self
            .sectors
            .iter()
            .filter(|s| s.sector_id != serving)
            .map(|s| Ok((s.load, power(s.sector_id)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(radio::sinr_db_from_powers(
            serving_dbm,
            interferers,
            self.constants.noise_power_dbm,
        ))
    }
}
