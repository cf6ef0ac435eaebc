//! Seeded synthetic instances.
//!
//! Entities get random planar positions; transport cost, delay and emission
//! follow from distance and mode. Scenario 1 is the undisrupted baseline and
//! later scenarios scale delays, demand, transport and holding costs and
//! main-facility capacity loss by a disruption level that grows with the
//! scenario index. Backup suppliers and temporary facilities cost more in
//! normal times but are barely touched by disruption.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::CoreError;
use crate::instance::{Instance, LinkData, NetworkSets, Parameters, ScenarioSet, Vec3, Vec4};

/// Named disruption intensity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    PaperLike,
    Mild,
    None,
}

impl Profile {
    pub fn intensity(self) -> f64 {
        match self {
            Profile::PaperLike => 1.0,
            Profile::Mild => 0.4,
            Profile::None => 0.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Profile::PaperLike => "paper-like",
            Profile::Mild => "mild",
            Profile::None => "none",
        }
    }
}

impl std::str::FromStr for Profile {
    type Err = CoreError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "paper-like" => Ok(Profile::PaperLike),
            "mild" => Ok(Profile::Mild),
            "none" => Ok(Profile::None),
            other => Err(CoreError::Profile(other.to_string())),
        }
    }
}

// Per-mode unit rates: road is fast and dirty, rail slow, clean and dearer.
const COST_PER_KM: [f64; 2] = [0.03, 0.04];
const EMISSION_PER_KM: [f64; 2] = [0.02, 0.008];
const KM_PER_DAY: [f64; 2] = [40.0, 15.0];

fn round4(v: f64) -> f64 {
    (v * 1e4).round() / 1e4
}

fn mode_rate(table: &[f64; 2], l: usize) -> f64 {
    // Extra modes beyond the two archetypes interpolate between them.
    table[l % 2] * (1.0 + 0.15 * (l / 2) as f64)
}

struct Echelon {
    positions: Vec<(f64, f64)>,
    n_main: usize,
}

impl Echelon {
    fn new(rng: &mut ChaCha8Rng, n_main: usize, n_extra: usize) -> Self {
        let positions = (0..n_main + n_extra)
            .map(|_| (rng.gen_range(0.0..100.0), rng.gen_range(0.0..100.0)))
            .collect();
        Echelon { positions, n_main }
    }

    fn is_main(&self, i: usize) -> bool {
        i < self.n_main
    }
}

fn distance(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt() + 5.0
}

/// Disruption level of each scenario: 0 for the baseline, rising to the
/// profile intensity for the last scenario.
fn levels(n_scenarios: usize, intensity: f64) -> Vec<f64> {
    if n_scenarios == 1 {
        return vec![0.0];
    }
    (0..n_scenarios)
        .map(|s| intensity * s as f64 / (n_scenarios - 1) as f64)
        .collect()
}

struct LinkTables {
    cost: Vec4,
    delay: Vec4,
    saved: Vec3,
    emission: Vec3,
}

fn link_tables(
    rng: &mut ChaCha8Rng,
    from: &Echelon,
    to: &Echelon,
    sets: &NetworkSets,
    lev: &[f64],
) -> LinkTables {
    let (no, nd) = (from.positions.len(), to.positions.len());
    let mut t = LinkTables {
        cost: vec![vec![vec![Vec::new(); sets.n_modes]; nd]; no],
        delay: vec![vec![vec![Vec::new(); sets.n_modes]; nd]; no],
        saved: vec![vec![vec![0.0; sets.n_modes]; nd]; no],
        emission: vec![vec![vec![0.0; sets.n_modes]; nd]; no],
    };
    for o in 0..no {
        for d in 0..nd {
            let dist = distance(from.positions[o], to.positions[d]);
            let standby = !from.is_main(o) || !to.is_main(d);
            // Standby partners carry a premium but shrug off disruption.
            let (premium, cost_shock, delay_shock) = if standby {
                (1.3, 0.1, 0.2)
            } else {
                (1.0, 0.6, 1.5)
            };
            for l in 0..sets.n_modes {
                let noise = rng.gen_range(0.9..1.1);
                let base_cost = mode_rate(&COST_PER_KM, l) * dist * premium * noise;
                let base_delay = dist / mode_rate(&KM_PER_DAY, l) * rng.gen_range(0.8..1.2);
                t.cost[o][d][l] = lev
                    .iter()
                    .map(|&x| round4(base_cost * (1.0 + cost_shock * x)))
                    .collect();
                t.delay[o][d][l] = lev
                    .iter()
                    .map(|&x| round4(base_delay * (1.0 + delay_shock * x)))
                    .collect();
                t.saved[o][d][l] = round4(base_delay * rng.gen_range(0.3..0.6));
                t.emission[o][d][l] =
                    round4(mode_rate(&EMISSION_PER_KM, l) * dist * rng.gen_range(0.9..1.1));
            }
        }
    }
    t
}

/// Builds a deterministic instance from `(seed, sets, profile)`.
pub fn generate_instance(
    seed: u64,
    sets: &NetworkSets,
    profile: &str,
) -> Result<(Instance, ScenarioSet), CoreError> {
    let profile: Profile = profile.parse()?;
    if sets.n_suppliers_main == 0
        || sets.n_manufacturers_main == 0
        || sets.n_warehouses_main == 0
        || sets.n_retailers == 0
        || sets.n_periods == 0
        || sets.n_modes == 0
        || sets.n_scenarios == 0
    {
        return Err(CoreError::Config("every main set needs at least one member".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lev = levels(sets.n_scenarios, profile.intensity());
    let (ns, nt) = (sets.n_scenarios, sets.n_periods);

    let suppliers = Echelon::new(&mut rng, sets.n_suppliers_main, sets.n_suppliers_backup);
    let mfgs = Echelon::new(&mut rng, sets.n_manufacturers_main, sets.n_manufacturers_temp);
    let whs = Echelon::new(&mut rng, sets.n_warehouses_main, sets.n_warehouses_temp);
    let retailers = Echelon::new(&mut rng, sets.n_retailers, 0);
    let a = link_tables(&mut rng, &suppliers, &mfgs, sets, &lev);
    let b = link_tables(&mut rng, &mfgs, &whs, sets, &lev);
    let c = link_tables(&mut rng, &whs, &retailers, sets, &lev);

    // Demand: a nominal level per retailer with mild period noise, raised by
    // disruption (panic buying of essential products).
    let demand: Vec3 = (0..sets.n_retailers)
        .map(|_| {
            let base = rng.gen_range(6500.0..8500.0);
            (0..nt)
                .map(|_| {
                    let nominal = base * rng.gen_range(0.95..1.05);
                    lev.iter()
                        .map(|&x| (nominal * (1.0 + 0.3 * x)).round())
                        .collect()
                })
                .collect()
        })
        .collect();
    let peak_period_demand = (0..nt)
        .flat_map(|t| (0..ns).map(move |s| (t, s)))
        .map(|(t, s)| demand.iter().map(|m| m[t][s]).sum::<f64>())
        .fold(0.0, f64::max);

    let nj = sets.manufacturers();
    let nk = sets.warehouses();
    let mfg_loss_base: Vec<f64> = (0..nj)
        .map(|j| if mfgs.is_main(j) { rng.gen_range(0.15..0.35) } else { 0.0 })
        .collect();
    let wh_loss_base: Vec<f64> = (0..nk)
        .map(|k| if whs.is_main(k) { rng.gen_range(0.1..0.3) } else { 0.0 })
        .collect();
    let mfg_capacity_loss: Vec<Vec<f64>> = mfg_loss_base
        .iter()
        .map(|&r| lev.iter().map(|&x| round4(r * x)).collect())
        .collect();
    let wh_capacity_loss: Vec<Vec<f64>> = wh_loss_base
        .iter()
        .map(|&r| lev.iter().map(|&x| round4(r * x)).collect())
        .collect();

    // Main facilities jointly cover the peak demand of every scenario with a
    // 15% margin after their own capacity loss; temporary ones add a little.
    let capacity = |n_main: usize, loss: &[Vec<f64>], rng: &mut ChaCha8Rng, total: usize| {
        let worst_share = (0..ns)
            .map(|s| (0..n_main).map(|j| 1.0 - loss[j][s]).sum::<f64>() / n_main as f64)
            .fold(f64::INFINITY, f64::min);
        let per_main = 1.15 * peak_period_demand / (n_main as f64 * worst_share);
        (0..total)
            .map(|j| {
                if j < n_main {
                    (per_main * rng.gen_range(1.0..1.1)).round()
                } else {
                    (per_main * rng.gen_range(0.35..0.5)).round()
                }
            })
            .collect::<Vec<f64>>()
    };
    let mfg_capacity = capacity(sets.n_manufacturers_main, &mfg_capacity_loss, &mut rng, nj);
    let wh_capacity = capacity(sets.n_warehouses_main, &wh_capacity_loss, &mut rng, nk);

    let emission_prod: Vec<f64> = (0..nj)
        .map(|j| round4(rng.gen_range(2.0..4.0) * if mfgs.is_main(j) { 1.0 } else { 1.2 }))
        .collect();
    let inv_cost: Vec<Vec<f64>> = (0..nj)
        .map(|_| {
            let base = rng.gen_range(0.5..1.0);
            lev.iter().map(|&x| round4(base * (1.0 + 0.3 * x))).collect()
        })
        .collect();
    let short_cost: Vec<Vec<f64>> = (0..nj)
        .map(|_| {
            let base = rng.gen_range(4.0..6.0);
            lev.iter().map(|&x| round4(base * (1.0 + 0.5 * x))).collect()
        })
        .collect();
    let setup_temp_mfg = (0..sets.n_manufacturers_temp)
        .map(|_| rng.gen_range(8000.0f64..15000.0).round())
        .collect();
    let setup_temp_wh = (0..sets.n_warehouses_temp)
        .map(|_| rng.gen_range(5000.0f64..10000.0).round())
        .collect();

    // Reference emission per unit: average production plus average transport
    // over main partners and modes, applied to each period's worst demand.
    let mean3 = |v: &Vec3, n_o: usize, n_d: usize| {
        let mut acc = 0.0;
        for row in v.iter().take(n_o) {
            for cell in row.iter().take(n_d) {
                acc += cell.iter().sum::<f64>() / cell.len() as f64;
            }
        }
        acc / (n_o * n_d) as f64
    };
    let per_unit = emission_prod[..sets.n_manufacturers_main].iter().sum::<f64>()
        / sets.n_manufacturers_main as f64
        + mean3(&a.emission, sets.n_suppliers_main, sets.n_manufacturers_main)
        + mean3(&b.emission, sets.n_manufacturers_main, sets.n_warehouses_main)
        + mean3(&c.emission, sets.n_warehouses_main, sets.n_retailers);
    // The cap tightens over time.
    let cap: Vec<f64> = (0..nt)
        .map(|t| {
            let worst = (0..ns)
                .map(|s| demand.iter().map(|m| m[t][s]).sum::<f64>())
                .fold(0.0, f64::max);
            (worst * per_unit * (1.25 - 0.03 * t as f64)).round()
        })
        .collect();
    let big_m = (0..ns)
        .map(|s| demand.iter().flatten().map(|p| p[s]).sum::<f64>())
        .fold(0.0, f64::max);

    let weights: Vec<f64> = (0..ns).map(|s| (ns - s) as f64).collect();
    let total: f64 = weights.iter().sum();
    let mut probability: Vec<f64> = weights.iter().map(|w| w / total).collect();
    // Make the sum exactly 1 in floating point.
    let rest: f64 = probability[1..].iter().sum();
    probability[0] = 1.0 - rest;

    let params = Parameters {
        transport_cost: LinkData {
            supplier_manufacturer: a.cost,
            manufacturer_warehouse: b.cost,
            warehouse_retailer: c.cost,
        },
        transport_delay: LinkData {
            supplier_manufacturer: a.delay,
            manufacturer_warehouse: b.delay,
            warehouse_retailer: c.delay,
        },
        delay_cost: 20.0,
        saved_time: LinkData {
            supplier_manufacturer: a.saved,
            manufacturer_warehouse: b.saved,
            warehouse_retailer: c.saved,
        },
        setup_temp_mfg,
        setup_temp_wh,
        info_setup: 20000.0,
        info_training: 10000.0,
        inv_cost,
        short_cost,
        mfg_capacity,
        wh_capacity,
        stockpile_premium: 3.5,
        min_suppliers: 2,
        emission_prod,
        emission_transport: LinkData {
            supplier_manufacturer: a.emission,
            manufacturer_warehouse: b.emission,
            warehouse_retailer: c.emission,
        },
        emission_saving: 0.1,
        cap,
        big_m,
    };
    Ok((
        Instance {
            sets: *sets,
            params,
        },
        ScenarioSet {
            probability,
            demand,
            mfg_capacity_loss,
            wh_capacity_loss,
        },
    ))
}

/// Small random instance with integer demand in `0..=max_demand`, for
/// cross-checking solvers against exhaustive enumeration. Capacities and
/// emission caps are drawn so that they bind in some instances and make
/// others infeasible.
pub fn generate_small(seed: u64, sets: &NetworkSets, max_demand: u32) -> (Instance, ScenarioSet) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (ns, nt, nl) = (sets.n_scenarios, sets.n_periods, sets.n_modes);
    let (ni, nj, nk, nm) = (
        sets.suppliers(),
        sets.manufacturers(),
        sets.warehouses(),
        sets.n_retailers,
    );
    let mut draw4 = |no: usize, nd: usize, lo: f64, hi: f64| -> Vec4 {
        (0..no)
            .map(|_| {
                (0..nd)
                    .map(|_| (0..nl).map(|_| (0..ns).map(|_| round4(rng.gen_range(lo..hi))).collect()).collect())
                    .collect()
            })
            .collect()
    };
    let transport_cost = LinkData {
        supplier_manufacturer: draw4(ni, nj, 0.5, 3.0),
        manufacturer_warehouse: draw4(nj, nk, 0.5, 3.0),
        warehouse_retailer: draw4(nk, nm, 0.5, 3.0),
    };
    let transport_delay = LinkData {
        supplier_manufacturer: draw4(ni, nj, 0.0, 2.0),
        manufacturer_warehouse: draw4(nj, nk, 0.0, 2.0),
        warehouse_retailer: draw4(nk, nm, 0.0, 2.0),
    };
    let mut draw3 = |no: usize, nd: usize, lo: f64, hi: f64| -> Vec3 {
        (0..no)
            .map(|_| (0..nd).map(|_| (0..nl).map(|_| round4(rng.gen_range(lo..hi))).collect()).collect())
            .collect()
    };
    let saved_time = LinkData {
        supplier_manufacturer: draw3(ni, nj, 0.0, 1.0),
        manufacturer_warehouse: draw3(nj, nk, 0.0, 1.0),
        warehouse_retailer: draw3(nk, nm, 0.0, 1.0),
    };
    let emission_transport = LinkData {
        supplier_manufacturer: draw3(ni, nj, 0.0, 1.0),
        manufacturer_warehouse: draw3(nj, nk, 0.0, 1.0),
        warehouse_retailer: draw3(nk, nm, 0.0, 1.0),
    };
    let demand: Vec3 = (0..nm)
        .map(|_| (0..nt).map(|_| (0..ns).map(|_| rng.gen_range(0..=max_demand) as f64).collect()).collect())
        .collect();
    let big_m = (0..ns)
        .map(|s| demand.iter().flatten().map(|p| p[s]).sum::<f64>())
        .fold(1.0, f64::max);
    let emission_prod: Vec<f64> = (0..nj).map(|_| round4(rng.gen_range(0.0..1.5))).collect();
    let peak = (0..nt)
        .flat_map(|t| (0..ns).map(move |s| (t, s)))
        .map(|(t, s)| demand.iter().map(|m| m[t][s]).sum::<f64>())
        .fold(0.0, f64::max);
    let cap = (0..nt)
        .map(|_| round4(peak * rng.gen_range(1.5..5.0)))
        .collect();
    let capacity = |rng: &mut ChaCha8Rng, n: usize| -> Vec<f64> {
        (0..n).map(|_| (peak * rng.gen_range(1.0..2.5)).ceil().max(1.0)).collect()
    };
    let mfg_capacity = capacity(&mut rng, nj);
    let wh_capacity = capacity(&mut rng, nk);
    let loss = |rng: &mut ChaCha8Rng, n: usize| -> Vec<Vec<f64>> {
        (0..n).map(|_| (0..ns).map(|_| round4(rng.gen_range(0.0..0.4))).collect()).collect()
    };
    let mfg_capacity_loss = loss(&mut rng, nj);
    let wh_capacity_loss = loss(&mut rng, nk);
    let per_j = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| -> Vec<Vec<f64>> {
        (0..nj).map(|_| (0..ns).map(|_| round4(rng.gen_range(lo..hi))).collect()).collect()
    };
    let inv_cost = per_j(&mut rng, 0.1, 2.0);
    let short_cost = per_j(&mut rng, 1.0, 8.0);
    let weights: Vec<f64> = (0..ns).map(|_| rng.gen_range(0.2..1.0)).collect();
    let total: f64 = weights.iter().sum();
    let mut probability: Vec<f64> = weights.iter().map(|w| w / total).collect();
    let rest: f64 = probability[1..].iter().sum();
    probability[0] = 1.0 - rest;
    let params = Parameters {
        transport_cost,
        transport_delay,
        delay_cost: round4(rng.gen_range(0.5..3.0)),
        saved_time,
        setup_temp_mfg: (0..sets.n_manufacturers_temp).map(|_| round4(rng.gen_range(1.0..10.0))).collect(),
        setup_temp_wh: (0..sets.n_warehouses_temp).map(|_| round4(rng.gen_range(1.0..10.0))).collect(),
        info_setup: round4(rng.gen_range(0.0..5.0)),
        info_training: round4(rng.gen_range(0.0..5.0)),
        inv_cost,
        short_cost,
        mfg_capacity,
        wh_capacity,
        stockpile_premium: round4(rng.gen_range(0.5..4.0)),
        min_suppliers: 2,
        emission_prod,
        emission_transport,
        emission_saving: round4(rng.gen_range(0.0..0.3)),
        cap,
        big_m,
    };
    (
        Instance { sets: *sets, params },
        ScenarioSet {
            probability,
            demand,
            mfg_capacity_loss,
            wh_capacity_loss,
        },
    )
}
