use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{NetworkScenario, Point, RadioConstants, Region, Sector, UserEquipment};
use crate::error::{CopError, Result};

const SECTORS_PER_SITE: u32 = 3;

/// Geometry and population settings for [`generate_scenario`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LayoutParams {
    pub constants: RadioConstants,
    pub n_sites: usize,
    pub inter_site_distance_m: f64,
    /// Margin added around the site bounding box to form the user region.
    pub margin_m: f64,
    pub n_users: usize,
    pub gathering_radius_m: f64,
    pub prb_count: u32,
    pub sector_load: f64,
    /// Traffic demand is drawn uniformly from this range.
    pub traffic_demand: (f64, f64),
    pub non_target_cio_db: f64,
    pub non_target_hom_db: f64,
}

impl Default for LayoutParams {
    fn default() -> Self {
        Self {
            constants: RadioConstants::default(),
            n_sites: 12,
            inter_site_distance_m: 500.0,
            margin_m: 250.0,
            n_users: 356,
            gathering_radius_m: 250.0,
            prb_count: 50,
            sector_load: 1.0,
            traffic_demand: (0.5, 1.5),
            non_target_cio_db: 0.0,
            non_target_hom_db: 0.0,
        }
    }
}

impl LayoutParams {
    pub fn validate(&self) -> Result<()> {
        self.constants.validate()?;
        if self.n_sites == 0 {
            return Err(CopError::Config("n_sites must be positive".into()));
        }
        if self.n_users == 0 {
            return Err(CopError::Config("n_users must be positive".into()));
        }
        if !(self.inter_site_distance_m > 0.0) {
            return Err(CopError::Config(
                "inter-site distance must be positive".into(),
            ));
        }
        if !(self.margin_m > 0.0) {
            return Err(CopError::Config("margin must be positive".into()));
        }
        if !(self.gathering_radius_m > 0.0) {
            return Err(CopError::Config("gathering radius must be positive".into()));
        }
        let (lo, hi) = self.traffic_demand;
        if !(lo > 0.0 && hi >= lo) {
            return Err(CopError::Config("invalid traffic demand range".into()));
        }
        Ok(())
    }
}

/// The first `n` points of a hexagonal lattice, ordered by distance from the
/// origin and then by compass bearing.
fn hex_sites(n: usize, isd: f64) -> Vec<Point> {
    let mut rings = 0i64;
    while 3 * rings * (rings + 1) + 1 < n as i64 {
        rings += 1;
    }
    // one extra ring so partial rings are chosen by distance, not by (q, r)
    let rings = rings + 1;
    let origin = Point::new(0.0, 0.0);
    let mut points = Vec::new();
    for q in -rings..=rings {
        for r in -rings..=rings {
            let x = isd * (q as f64 + r as f64 / 2.0);
            let y = isd * (r as f64 * 3f64.sqrt() / 2.0);
            points.push(Point::new(x, y));
        }
    }
    let key = |p: &Point| {
        (
            (origin.distance(p) * 1e6).round() as i64,
            (origin.bearing_deg(p) * 1e6).round() as i64,
        )
    };
    points.sort_by_key(key);
    points.truncate(n);
    points
}

/// Builds a hexagonal multi-site layout with users scattered uniformly over
/// the bounding region. The three sectors of the central site are the
/// targets. Deterministic in `seed`.
pub fn generate_scenario(seed: u64, params: &LayoutParams) -> Result<NetworkScenario> {
    params.validate()?;
    let sites = hex_sites(params.n_sites, params.inter_site_distance_m);

    let mut sectors = Vec::with_capacity(sites.len() * SECTORS_PER_SITE as usize);
    for (site_idx, &site_position) in sites.iter().enumerate() {
        for k in 0..SECTORS_PER_SITE {
            sectors.push(Sector {
                sector_id: site_idx as u32 * SECTORS_PER_SITE + k,
                site_position,
                azimuth_deg: f64::from(k) * 360.0 / f64::from(SECTORS_PER_SITE),
                is_target: site_idx == 0,
                load: params.sector_load,
            });
        }
    }

    let (min_x, max_x, min_y, max_y) = sites.iter().fold(
        (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY),
        |(a, b, c, d), p| (a.min(p.x), b.max(p.x), c.min(p.y), d.max(p.y)),
    );
    let region = Region {
        min: Point::new(min_x - params.margin_m, min_y - params.margin_m),
        max: Point::new(max_x + params.margin_m, max_y + params.margin_m),
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (tau_lo, tau_hi) = params.traffic_demand;
    let users = (0..params.n_users)
        .map(|i| {
            let x = rng.gen_range(region.min.x..=region.max.x);
            let y = rng.gen_range(region.min.y..=region.max.y);
            let traffic_demand = if tau_hi > tau_lo {
                rng.gen_range(tau_lo..tau_hi)
            } else {
                tau_lo
            };
            UserEquipment {
                ue_id: i as u32,
                position: Point::new(x, y),
                traffic_demand,
            }
        })
        .collect();

    NetworkScenario {
        rng_seed: seed,
        non_target_cio_db: params.non_target_cio_db,
        non_target_hom_db: params.non_target_hom_db,
        prb_count: params.prb_count,
        gathering_radius_m: params.gathering_radius_m,
        region,
        constants: params.constants.clone(),
        sectors,
        users,
    }
    .normalized()
}
