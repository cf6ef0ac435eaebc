//! Exhaustive reference optimizer for tiny instances, with its own constraint
//! checker and objective evaluator.
//!
//! Nothing here reads the formulation's rows or objective vectors. Points are
//! held in an [`Assignment`] and only converted to model columns at the edge.
//!
//! The search solves the integer version of the model with every flow and
//! stock variable restricted to `0..=max_flow`. Per period it enumerates every
//! mode choice for every link, and per scenario it runs a dynamic program over
//! the net stock position `MI + MSS - MS` of each manufacturer, which is all
//! the balance rows carry from one period to the next.

use std::fmt;

use crate::error::CoreError;
use crate::instance::{Instance, Link, ScenarioSet, StrategyConfig};
use crate::model::{CapMode, DelayMode, MilpModel, ModelOptions, VarKey};

/// Largest search-space estimate [`enumerate_optimal`] accepts.
pub const SEARCH_LIMIT: f64 = 1e7;

const TOL: f64 = 1e-9;

fn link_index(link: Link) -> usize {
    match link {
        Link::SupplierManufacturer => 0,
        Link::ManufacturerWarehouse => 1,
        Link::WarehouseRetailer => 2,
    }
}

const LINKS: [Link; 3] = [
    Link::SupplierManufacturer,
    Link::ManufacturerWarehouse,
    Link::WarehouseRetailer,
];

/// Entity counts after the strategy flags are applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    pub suppliers: usize,
    pub manufacturers: usize,
    pub warehouses: usize,
    pub retailers: usize,
    pub periods: usize,
    pub modes: usize,
    pub scenarios: usize,
    pub main_manufacturers: usize,
    pub main_warehouses: usize,
}

impl Dims {
    pub fn new(inst: &Instance, cfg: &StrategyConfig) -> Self {
        let s = &inst.sets;
        let backup = if cfg.backup_suppliers { s.n_suppliers_backup } else { 0 };
        let (tm, tw) = if cfg.temporary_facilities {
            (s.n_manufacturers_temp, s.n_warehouses_temp)
        } else {
            (0, 0)
        };
        Dims {
            suppliers: s.n_suppliers_main + backup,
            manufacturers: s.n_manufacturers_main + tm,
            warehouses: s.n_warehouses_main + tw,
            retailers: s.n_retailers,
            periods: s.n_periods,
            modes: s.n_modes,
            scenarios: s.n_scenarios,
            main_manufacturers: s.n_manufacturers_main,
            main_warehouses: s.n_warehouses_main,
        }
    }

    fn extent(&self, link: Link) -> (usize, usize) {
        match link {
            Link::SupplierManufacturer => (self.suppliers, self.manufacturers),
            Link::ManufacturerWarehouse => (self.manufacturers, self.warehouses),
            Link::WarehouseRetailer => (self.warehouses, self.retailers),
        }
    }

    fn temp_mfg(&self, j: usize) -> Option<usize> {
        (j >= self.main_manufacturers).then(|| j - self.main_manufacturers)
    }

    fn temp_wh(&self, k: usize) -> Option<usize> {
        (k >= self.main_warehouses).then(|| k - self.main_warehouses)
    }
}

/// A full point of the model, indexed by entity rather than by column.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub dims: Dims,
    /// Link binaries per link, flattened `[o][d][t][l]`.
    pub open: [Vec<f64>; 3],
    /// Link flows per link, flattened `[o][d][t][l][s]`.
    pub flow: [Vec<f64>; 3],
    /// Opening decisions of temporary manufacturers, by temporary ordinal.
    pub open_mfg: Vec<f64>,
    pub open_wh: Vec<f64>,
    /// Stocks flattened `[j][t][s]`; `mss` and `sp` stay zero when unused.
    pub mi: Vec<f64>,
    pub ms: Vec<f64>,
    pub mss: Vec<f64>,
    pub sp: Vec<f64>,
}

impl Assignment {
    pub fn zeros(dims: Dims) -> Self {
        let (nt, nl, ns) = (dims.periods, dims.modes, dims.scenarios);
        let open = LINKS.map(|link| {
            let (no, nd) = dims.extent(link);
            vec![0.0; no * nd * nt * nl]
        });
        let flow = LINKS.map(|link| {
            let (no, nd) = dims.extent(link);
            vec![0.0; no * nd * nt * nl * ns]
        });
        let stock = dims.manufacturers * nt * ns;
        Assignment {
            dims,
            open,
            flow,
            open_mfg: vec![0.0; dims.manufacturers - dims.main_manufacturers],
            open_wh: vec![0.0; dims.warehouses - dims.main_warehouses],
            mi: vec![0.0; stock],
            ms: vec![0.0; stock],
            mss: vec![0.0; stock],
            sp: vec![0.0; stock],
        }
    }

    fn bin_at(&self, link: Link, o: usize, d: usize, t: usize, l: usize) -> usize {
        let (_, nd) = self.dims.extent(link);
        ((o * nd + d) * self.dims.periods + t) * self.dims.modes + l
    }

    fn flow_at(&self, link: Link, o: usize, d: usize, t: usize, l: usize, s: usize) -> usize {
        self.bin_at(link, o, d, t, l) * self.dims.scenarios + s
    }

    fn stock_at(&self, j: usize, t: usize, s: usize) -> usize {
        (j * self.dims.periods + t) * self.dims.scenarios + s
    }

    pub fn bin(&self, link: Link, o: usize, d: usize, t: usize, l: usize) -> f64 {
        self.open[link_index(link)][self.bin_at(link, o, d, t, l)]
    }

    pub fn set_bin(&mut self, link: Link, o: usize, d: usize, t: usize, l: usize, v: f64) {
        let i = self.bin_at(link, o, d, t, l);
        self.open[link_index(link)][i] = v;
    }

    pub fn flow(&self, link: Link, o: usize, d: usize, t: usize, l: usize, s: usize) -> f64 {
        self.flow[link_index(link)][self.flow_at(link, o, d, t, l, s)]
    }

    pub fn set_flow(&mut self, link: Link, o: usize, d: usize, t: usize, l: usize, s: usize, v: f64) {
        let i = self.flow_at(link, o, d, t, l, s);
        self.flow[link_index(link)][i] = v;
    }

    fn slot(&mut self, key: &VarKey) -> Option<&mut f64> {
        let (link, o, d, t, l, s) = match *key {
            VarKey::XX { i, j, t, l } => (Link::SupplierManufacturer, i, j, t, l, None),
            VarKey::YY { j, k, t, l } => (Link::ManufacturerWarehouse, j, k, t, l, None),
            VarKey::ZZ { k, m, t, l } => (Link::WarehouseRetailer, k, m, t, l, None),
            VarKey::X { i, j, t, l, s } => (Link::SupplierManufacturer, i, j, t, l, Some(s)),
            VarKey::Y { j, k, t, l, s } => (Link::ManufacturerWarehouse, j, k, t, l, Some(s)),
            VarKey::Z { k, m, t, l, s } => (Link::WarehouseRetailer, k, m, t, l, Some(s)),
            VarKey::U { j } => {
                let i = self.dims.temp_mfg(j)?;
                return self.open_mfg.get_mut(i);
            }
            VarKey::V { k } => {
                let i = self.dims.temp_wh(k)?;
                return self.open_wh.get_mut(i);
            }
            VarKey::MI { j, t, s } => {
                let i = self.stock_at(j, t, s);
                return self.mi.get_mut(i);
            }
            VarKey::MS { j, t, s } => {
                let i = self.stock_at(j, t, s);
                return self.ms.get_mut(i);
            }
            VarKey::MSS { j, t, s } => {
                let i = self.stock_at(j, t, s);
                return self.mss.get_mut(i);
            }
            VarKey::SP { j, t, s } => {
                let i = self.stock_at(j, t, s);
                return self.sp.get_mut(i);
            }
        };
        let li = link_index(link);
        match s {
            None => {
                let i = self.bin_at(link, o, d, t, l);
                self.open[li].get_mut(i)
            }
            Some(s) => {
                let i = self.flow_at(link, o, d, t, l, s);
                self.flow[li].get_mut(i)
            }
        }
    }

    /// Column vector of `model` holding this point.
    pub fn to_model_point(&self, model: &MilpModel) -> Vec<f64> {
        let mut me = self.clone();
        model
            .var_map
            .keys
            .iter()
            .map(|k| me.slot(k).map(|v| *v).unwrap_or(0.0))
            .collect()
    }

    pub fn from_model_point(model: &MilpModel, x: &[f64]) -> Self {
        let mut a = Assignment::zeros(Dims::new(&model.instance, &model.strategies));
        for (k, &v) in model.var_map.keys.iter().zip(x) {
            if let Some(slot) = a.slot(k) {
                *slot = v;
            }
        }
        a
    }
}

/// A violated constraint, named like the formulation's row tags.
#[derive(Debug, Clone, PartialEq)]
pub struct RowViolation {
    pub family: &'static str,
    /// 1-based index tuple.
    pub index: Vec<(&'static str, usize)>,
    pub amount: f64,
}

impl fmt::Display for RowViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let idx: Vec<String> = self.index.iter().map(|(n, v)| format!("{n}={v}")).collect();
        write!(f, "{}({})", self.family, idx.join(","))
    }
}

enum Sense {
    Le,
    Ge,
    Eq,
}

struct Checker {
    tol: f64,
    out: Vec<RowViolation>,
}

impl Checker {
    fn row(&mut self, family: &'static str, index: &[(&'static str, usize)], lhs: f64, sense: Sense, rhs: f64) {
        let amount = match sense {
            Sense::Le => lhs - rhs,
            Sense::Ge => rhs - lhs,
            Sense::Eq => (lhs - rhs).abs(),
        };
        if amount > self.tol || amount.is_nan() {
            self.out.push(RowViolation {
                family,
                index: index.iter().map(|&(n, v)| (n, v + 1)).collect(),
                amount,
            });
        }
    }
}

fn cet(inst: &Instance, cfg: &StrategyConfig, link: Link, o: usize, d: usize, l: usize) -> f64 {
    let raw = inst.params.emission_transport.get(link)[o][d][l];
    let cut = if cfg.info_sharing { inst.params.emission_saving } else { 0.0 };
    (raw - cut).max(0.0)
}

fn unit_emission(inst: &Instance, cfg: &StrategyConfig, link: Link, o: usize, d: usize, l: usize) -> f64 {
    let prod = if link == Link::ManufacturerWarehouse {
        inst.params.emission_prod[o]
    } else {
        0.0
    };
    prod + cet(inst, cfg, link, o, d, l)
}

/// Checks every constraint of the model against `a`. Variable domains
/// (non-negativity, binaries, integrality) are not checked.
pub fn check_assignment(
    inst: &Instance,
    scen: &ScenarioSet,
    cfg: &StrategyConfig,
    opts: &ModelOptions,
    a: &Assignment,
    tol: f64,
) -> Vec<RowViolation> {
    let d = a.dims;
    let p = &inst.params;
    let (nt, nl, ns) = (d.periods, d.modes, d.scenarios);
    let mut c = Checker { tol, out: Vec::new() };
    let names = |link: Link| match link {
        Link::SupplierManufacturer => ("i", "j"),
        Link::ManufacturerWarehouse => ("j", "k"),
        Link::WarehouseRetailer => ("k", "m"),
    };

    for link in LINKS {
        let (no, nd) = d.extent(link);
        let (on, dn) = names(link);
        let fam = ["linking-x", "linking-y", "linking-z"][link_index(link)];
        for o in 0..no {
            for dd in 0..nd {
                for t in 0..nt {
                    for l in 0..nl {
                        for s in 0..ns {
                            let lhs = a.flow(link, o, dd, t, l, s) - p.big_m * a.bin(link, o, dd, t, l);
                            c.row(fam, &[(on, o), (dn, dd), ("t", t), ("l", l), ("s", s)], lhs, Sense::Le, 0.0);
                        }
                    }
                }
            }
        }
        let fam = ["single-mode-x", "single-mode-y", "single-mode-z"][link_index(link)];
        for o in 0..no {
            for dd in 0..nd {
                for t in 0..nt {
                    let lhs: f64 = (0..nl).map(|l| a.bin(link, o, dd, t, l)).sum();
                    c.row(fam, &[(on, o), (dn, dd), ("t", t)], lhs, Sense::Le, 1.0);
                }
            }
        }
    }

    for j in 0..d.manufacturers {
        for t in 0..nt {
            for s in 0..ns {
                let st = |v: &[f64], t: usize| v[a.stock_at(j, t, s)];
                let mut inflow: f64 = (0..d.suppliers)
                    .flat_map(|i| (0..nl).map(move |l| (i, l)))
                    .map(|(i, l)| a.flow(Link::SupplierManufacturer, i, j, t, l, s))
                    .sum();
                let mut outflow: f64 = (0..d.warehouses)
                    .flat_map(|k| (0..nl).map(move |l| (k, l)))
                    .map(|(k, l)| a.flow(Link::ManufacturerWarehouse, j, k, t, l, s))
                    .sum();
                inflow += st(&a.ms, t);
                outflow += st(&a.mi, t);
                if t > 0 {
                    inflow += st(&a.mi, t - 1);
                    outflow += st(&a.ms, t - 1);
                }
                if cfg.safety_stock {
                    outflow += st(&a.mss, t);
                    if t > 0 {
                        inflow += st(&a.mss, t - 1);
                    }
                }
                if cfg.stockpiling {
                    inflow += st(&a.sp, t);
                }
                c.row("balance", &[("j", j), ("t", t), ("s", s)], inflow - outflow, Sense::Eq, 0.0);
            }
        }
    }

    for k in 0..d.warehouses {
        for t in 0..nt {
            for s in 0..ns {
                let mut lhs = 0.0;
                for l in 0..nl {
                    for j in 0..d.manufacturers {
                        lhs += a.flow(Link::ManufacturerWarehouse, j, k, t, l, s);
                    }
                    for m in 0..d.retailers {
                        lhs -= a.flow(Link::WarehouseRetailer, k, m, t, l, s);
                    }
                }
                c.row("flow-through", &[("k", k), ("t", t), ("s", s)], lhs, Sense::Eq, 0.0);
            }
        }
    }

    for m in 0..d.retailers {
        for t in 0..nt {
            for s in 0..ns {
                let mut lhs = 0.0;
                for k in 0..d.warehouses {
                    for l in 0..nl {
                        lhs += a.flow(Link::WarehouseRetailer, k, m, t, l, s);
                    }
                }
                c.row("demand", &[("m", m), ("t", t), ("s", s)], lhs, Sense::Eq, scen.demand[m][t][s]);
            }
        }
    }

    let emission = |t: usize, s: usize| {
        let mut e = 0.0;
        for link in LINKS {
            let (no, nd) = d.extent(link);
            for o in 0..no {
                for dd in 0..nd {
                    for l in 0..nl {
                        e += unit_emission(inst, cfg, link, o, dd, l) * a.flow(link, o, dd, t, l, s);
                    }
                }
            }
        }
        e
    };
    for t in 0..nt {
        match opts.cap_mode {
            CapMode::PerScenario => {
                for s in 0..ns {
                    c.row("emission-cap", &[("t", t), ("s", s)], emission(t, s), Sense::Le, p.cap[t]);
                }
            }
            CapMode::Literal => {
                let e: f64 = (0..ns).map(|s| emission(t, s)).sum();
                c.row("emission-cap", &[("t", t)], e, Sense::Le, p.cap[t]);
            }
        }
    }

    if cfg.multiple_sourcing {
        let sm = p.min_suppliers as f64;
        for j in 0..d.manufacturers {
            for t in 0..nt {
                let opened: f64 = (0..d.suppliers)
                    .flat_map(|i| (0..nl).map(move |l| (i, l)))
                    .map(|(i, l)| a.bin(Link::SupplierManufacturer, i, j, t, l))
                    .sum();
                let need = match d.temp_mfg(j) {
                    Some(u) => sm * a.open_mfg[u],
                    None => sm,
                };
                c.row("min-suppliers", &[("j", j), ("t", t)], opened, Sense::Ge, need);
            }
        }
    }

    for j in 0..d.manufacturers {
        for t in 0..nt {
            for s in 0..ns {
                let mut lhs = 0.0;
                for k in 0..d.warehouses {
                    for l in 0..nl {
                        lhs += a.flow(Link::ManufacturerWarehouse, j, k, t, l, s);
                    }
                }
                let cap = p.mfg_capacity[j] * (1.0 - scen.mfg_capacity_loss[j][s]);
                c.row("capacity-mfg", &[("j", j), ("t", t), ("s", s)], lhs, Sense::Le, cap);
            }
        }
    }
    for k in 0..d.warehouses {
        for t in 0..nt {
            for s in 0..ns {
                let mut lhs = 0.0;
                for m in 0..d.retailers {
                    for l in 0..nl {
                        lhs += a.flow(Link::WarehouseRetailer, k, m, t, l, s);
                    }
                }
                let cap = p.wh_capacity[k] * (1.0 - scen.wh_capacity_loss[k][s]);
                c.row("capacity-wh", &[("k", k), ("t", t), ("s", s)], lhs, Sense::Le, cap);
            }
        }
    }

    for j in 0..d.manufacturers {
        let Some(u) = d.temp_mfg(j) else { continue };
        for k in 0..d.warehouses {
            for t in 0..nt {
                for l in 0..nl {
                    let lhs = a.bin(Link::ManufacturerWarehouse, j, k, t, l) - a.open_mfg[u];
                    c.row("activation-mfg", &[("j", j), ("k", k), ("t", t), ("l", l)], lhs, Sense::Le, 0.0);
                }
            }
        }
    }
    for k in 0..d.warehouses {
        let Some(v) = d.temp_wh(k) else { continue };
        for j in 0..d.manufacturers {
            for t in 0..nt {
                for l in 0..nl {
                    let lhs = a.bin(Link::ManufacturerWarehouse, j, k, t, l) - a.open_wh[v];
                    c.row("activation-wh-in", &[("j", j), ("k", k), ("t", t), ("l", l)], lhs, Sense::Le, 0.0);
                }
            }
        }
        for m in 0..d.retailers {
            for t in 0..nt {
                for l in 0..nl {
                    let lhs = a.bin(Link::WarehouseRetailer, k, m, t, l) - a.open_wh[v];
                    c.row("activation-wh-out", &[("k", k), ("m", m), ("t", t), ("l", l)], lhs, Sense::Le, 0.0);
                }
            }
        }
    }
    c.out
}

fn delay_weight(inst: &Instance, scen: &ScenarioSet, cfg: &StrategyConfig, mode: DelayMode, link: Link, o: usize, d: usize, l: usize) -> f64 {
    let p = &inst.params;
    let saved = if cfg.info_sharing { p.saved_time.get(link)[o][d][l] } else { 0.0 };
    let mut total = 0.0;
    for s in 0..scen.probability.len() {
        let late = (p.transport_delay.get(link)[o][d][l][s] - saved).max(0.0);
        total += match mode {
            DelayMode::Expected => scen.probability[s] * late,
            DelayMode::Literal => late,
        };
    }
    p.delay_cost * total
}

/// `w1 * Z1 + w2 * Z2` of `a`.
pub fn objective(inst: &Instance, scen: &ScenarioSet, cfg: &StrategyConfig, opts: &ModelOptions, a: &Assignment) -> f64 {
    let d = a.dims;
    let p = &inst.params;
    let (nt, nl, ns) = (d.periods, d.modes, d.scenarios);
    let mut first = 0.0;
    let mut per_cost = vec![0.0; ns];
    let mut per_emission = vec![0.0; ns];
    for link in LINKS {
        let (no, nd) = d.extent(link);
        for o in 0..no {
            for dd in 0..nd {
                for l in 0..nl {
                    let delay = delay_weight(inst, scen, cfg, opts.delay_mode, link, o, dd, l);
                    let e = unit_emission(inst, cfg, link, o, dd, l);
                    for t in 0..nt {
                        first += delay * a.bin(link, o, dd, t, l);
                        for s in 0..ns {
                            let f = a.flow(link, o, dd, t, l, s);
                            per_cost[s] += p.transport_cost.get(link)[o][dd][l][s] * f;
                            per_emission[s] += e * f;
                        }
                    }
                }
            }
        }
    }
    first += a.open_mfg.iter().zip(&p.setup_temp_mfg).map(|(u, c)| u * c).sum::<f64>();
    first += a.open_wh.iter().zip(&p.setup_temp_wh).map(|(v, c)| v * c).sum::<f64>();
    if cfg.info_sharing {
        first += p.info_setup + p.info_training;
    }
    for j in 0..d.manufacturers {
        for t in 0..nt {
            for s in 0..ns {
                let i = a.stock_at(j, t, s);
                per_cost[s] += p.inv_cost[j][s] * (a.mi[i] + a.mss[i])
                    + p.short_cost[j][s] * a.ms[i]
                    + p.stockpile_premium * a.sp[i];
            }
        }
    }
    let pr = &scen.probability;
    let z1 = first + (0..ns).map(|s| pr[s] * per_cost[s]).sum::<f64>();
    let z2: f64 = (0..ns).map(|s| pr[s] * per_emission[s]).sum();
    opts.weights.cost * z1 + opts.weights.emission * z2
}

#[derive(Debug, Clone)]
pub struct OracleResult {
    pub objective: f64,
    pub assignment: Assignment,
    /// Search-space estimate that passed the guard.
    pub estimate: f64,
}

/// Every composition of `total` into `parts` integers in `0..=ub`.
fn compositions(total: u32, parts: usize, ub: u32) -> Vec<Vec<u32>> {
    fn go(rest: u32, parts: usize, ub: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if parts == 1 {
            if rest <= ub {
                cur.push(rest);
                out.push(cur.clone());
                cur.pop();
            }
            return;
        }
        for v in 0..=rest.min(ub) {
            cur.push(v);
            go(rest - v, parts - 1, ub, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if parts == 0 {
        if total == 0 {
            out.push(Vec::new());
        }
        return out;
    }
    go(total, parts, ub, &mut Vec::new(), &mut out);
    out
}

/// Cartesian product of option lists, concatenated.
fn product(lists: &[Vec<Vec<u32>>]) -> Vec<Vec<u32>> {
    let mut out = vec![Vec::new()];
    for list in lists {
        let mut next = Vec::with_capacity(out.len() * list.len());
        for prefix in &out {
            for item in list {
                let mut v = prefix.clone();
                v.extend_from_slice(item);
                next.push(v);
            }
        }
        out = next;
    }
    out
}

struct Downstream {
    ship: Vec<i64>,
    cost: f64,
    emission: f64,
    /// Values for the open Z arcs, then the open Y arcs.
    z: Vec<u32>,
    y: Vec<u32>,
}

struct Upstream {
    supply: Vec<i64>,
    cost: f64,
    emission: f64,
    x: Vec<u32>,
    sp: Vec<u32>,
}

struct Transition {
    cost: Vec<f64>,
    arg: Vec<(u32, u32)>,
    down: Vec<Downstream>,
    up: Vec<Upstream>,
    /// Open arcs per link as `(o, d, mode)`.
    arcs: [Vec<(usize, usize, usize)>; 3],
}

struct Search<'a> {
    inst: &'a Instance,
    scen: &'a ScenarioSet,
    cfg: &'a StrategyConfig,
    opts: &'a ModelOptions,
    d: Dims,
    ub: u32,
    pairs: Vec<(Link, usize, usize)>,
    radix: usize,
    n_min: i64,
    range: usize,
    n_states: usize,
    /// Decoded state vectors.
    states: Vec<Vec<i64>>,
    zero_state: usize,
    /// Cheapest stock split per `[j][s][n - n_min]`: cost and `(mi, ms, mss)`.
    hold: Vec<Vec<Vec<Option<(f64, [u32; 3])>>>>,
}

impl<'a> Search<'a> {
    fn modes_of(&self, f: usize) -> Vec<Option<usize>> {
        let mut f = f;
        (0..self.pairs.len())
            .map(|_| {
                let digit = f % self.radix;
                f /= self.radix;
                digit.checked_sub(1)
            })
            .collect()
    }

    fn first_stage_ok(&self, modes: &[Option<usize>], u: &[bool], v: &[bool]) -> bool {
        let d = &self.d;
        let mut suppliers = vec![0u32; d.manufacturers];
        for (&(link, o, dd), mode) in self.pairs.iter().zip(modes) {
            if mode.is_none() {
                continue;
            }
            match link {
                Link::SupplierManufacturer => suppliers[dd] += 1,
                Link::ManufacturerWarehouse => {
                    if d.temp_mfg(o).is_some_and(|i| !u[i]) || d.temp_wh(dd).is_some_and(|i| !v[i]) {
                        return false;
                    }
                }
                Link::WarehouseRetailer => {
                    if d.temp_wh(o).is_some_and(|i| !v[i]) {
                        return false;
                    }
                }
            }
        }
        if self.cfg.multiple_sourcing {
            let sm = self.inst.params.min_suppliers;
            for (j, &n) in suppliers.iter().enumerate() {
                let open = d.temp_mfg(j).map_or(true, |i| u[i]);
                if open && n < sm {
                    return false;
                }
            }
        }
        true
    }

    fn first_stage_cost(&self, modes: &[Option<usize>]) -> f64 {
        let mut c = 0.0;
        for (&(link, o, dd), mode) in self.pairs.iter().zip(modes) {
            if let Some(l) = *mode {
                c += delay_weight(self.inst, self.scen, self.cfg, self.opts.delay_mode, link, o, dd, l);
            }
        }
        self.opts.weights.cost * c
    }

    fn arc_cap(&self) -> u32 {
        let m = self.inst.params.big_m;
        if m >= self.ub as f64 {
            self.ub
        } else {
            (m + TOL).floor().max(0.0) as u32
        }
    }

    fn transition(&self, t: usize, s: usize, modes: &[Option<usize>]) -> Transition {
        let d = &self.d;
        let p = &self.inst.params;
        let scen = self.scen;
        let mut arcs: [Vec<(usize, usize, usize)>; 3] = Default::default();
        for (&(link, o, dd), mode) in self.pairs.iter().zip(modes) {
            if let Some(l) = *mode {
                arcs[link_index(link)].push((o, dd, l));
            }
        }
        let cap = self.arc_cap();
        let down = self.downstream(t, s, &arcs, cap);

        // Upstream: every supply vector through the open X arcs plus purchases.
        let mut x_lists = Vec::new();
        for _ in &arcs[0] {
            x_lists.push((0..=cap).map(|v| vec![v]).collect::<Vec<_>>());
        }
        let sp_range = if self.cfg.stockpiling { self.ub } else { 0 };
        for _ in 0..d.manufacturers {
            x_lists.push((0..=sp_range).map(|v| vec![v]).collect());
        }
        let mut up = Vec::new();
        for combo in product(&x_lists) {
            let (x, sp) = combo.split_at(arcs[0].len());
            let mut supply: Vec<i64> = sp.iter().map(|&v| v as i64).collect();
            let mut cost = sp.iter().map(|&v| v as f64).sum::<f64>() * p.stockpile_premium;
            let mut emission = 0.0;
            for (&(i, j, l), &v) in arcs[0].iter().zip(x) {
                let link = Link::SupplierManufacturer;
                supply[j] += v as i64;
                cost += p.transport_cost.get(link)[i][j][l][s] * v as f64;
                emission += unit_emission(self.inst, self.cfg, link, i, j, l) * v as f64;
            }
            up.push(Upstream {
                supply,
                cost,
                emission,
                x: x.to_vec(),
                sp: sp.to_vec(),
            });
        }

        let pr = scen.probability[s];
        let wc = self.opts.weights.cost * pr;
        let we = self.opts.weights.emission * pr;
        let limit = p.cap[t];
        let n = self.n_states;
        let mut cost = vec![f64::INFINITY; n * n];
        let mut arg = vec![(0u32, 0u32); n * n];
        let mut next = vec![0i64; d.manufacturers];
        for (di, dn) in down.iter().enumerate() {
            for (ui, un) in up.iter().enumerate() {
                let e = dn.emission + un.emission;
                if e > limit + TOL * limit.abs().max(1.0) {
                    continue;
                }
                let base = wc * (dn.cost + un.cost) + we * e;
                'prev: for (from, state) in self.states.iter().enumerate() {
                    let mut hold = 0.0;
                    for j in 0..d.manufacturers {
                        next[j] = state[j] + un.supply[j] - dn.ship[j];
                        let idx = next[j] - self.n_min;
                        if idx < 0 || idx as usize >= self.range {
                            continue 'prev;
                        }
                        match self.hold[j][s][idx as usize] {
                            Some((c, _)) => hold += c,
                            None => continue 'prev,
                        }
                    }
                    let to = self.encode(&next);
                    let total = base + wc * hold;
                    let cell = from * n + to;
                    if total < cost[cell] {
                        cost[cell] = total;
                        arg[cell] = (di as u32, ui as u32);
                    }
                }
            }
        }
        Transition { cost, arg, down, up, arcs }
    }

    fn downstream(&self, t: usize, s: usize, arcs: &[Vec<(usize, usize, usize)>; 3], cap: u32) -> Vec<Downstream> {
        let d = &self.d;
        let p = &self.inst.params;
        let scen = self.scen;
        // Retail deliveries, retailer by retailer.
        let mut z_order = Vec::new();
        let mut z_lists = Vec::new();
        for m in 0..d.retailers {
            let demand = scen.demand[m][t][s];
            let whole = demand.round();
            let ids: Vec<usize> = (0..arcs[2].len()).filter(|&a| arcs[2][a].1 == m).collect();
            let options = if (demand - whole).abs() > TOL || whole < 0.0 {
                Vec::new()
            } else {
                compositions(whole as u32, ids.len(), cap)
            };
            z_order.extend(ids);
            z_lists.push(options);
        }
        let mut out = Vec::new();
        for z_combo in product(&z_lists) {
            let mut z = vec![0u32; arcs[2].len()];
            for (&a, &v) in z_order.iter().zip(&z_combo) {
                z[a] = v;
            }
            let mut inflow = vec![0u32; d.warehouses];
            for (&(k, _, _), &v) in arcs[2].iter().zip(&z) {
                inflow[k] += v;
            }
            let wh_ok = (0..d.warehouses).all(|k| {
                inflow[k] as f64 <= p.wh_capacity[k] * (1.0 - scen.wh_capacity_loss[k][s]) + TOL
            });
            if !wh_ok {
                continue;
            }
            let mut y_order = Vec::new();
            let mut y_lists = Vec::new();
            for k in 0..d.warehouses {
                let ids: Vec<usize> = (0..arcs[1].len()).filter(|&a| arcs[1][a].1 == k).collect();
                y_lists.push(compositions(inflow[k], ids.len(), cap));
                y_order.extend(ids);
            }
            for y_combo in product(&y_lists) {
                let mut y = vec![0u32; arcs[1].len()];
                for (&a, &v) in y_order.iter().zip(&y_combo) {
                    y[a] = v;
                }
                let mut ship = vec![0i64; d.manufacturers];
                for (&(j, _, _), &v) in arcs[1].iter().zip(&y) {
                    ship[j] += v as i64;
                }
                let mfg_ok = (0..d.manufacturers).all(|j| {
                    ship[j] as f64 <= p.mfg_capacity[j] * (1.0 - scen.mfg_capacity_loss[j][s]) + TOL
                });
                if !mfg_ok {
                    continue;
                }
                let mut cost = 0.0;
                let mut emission = 0.0;
                for (li, vals) in [(1usize, &y), (2, &z)] {
                    let link = LINKS[li];
                    for (&(o, dd, l), &v) in arcs[li].iter().zip(vals.iter()) {
                        cost += p.transport_cost.get(link)[o][dd][l][s] * v as f64;
                        emission += unit_emission(self.inst, self.cfg, link, o, dd, l) * v as f64;
                    }
                }
                out.push(Downstream {
                    ship,
                    cost,
                    emission,
                    z: z.clone(),
                    y,
                });
            }
        }
        out
    }

    fn encode(&self, state: &[i64]) -> usize {
        state
            .iter()
            .rev()
            .fold(0, |acc, &n| acc * self.range + (n - self.n_min) as usize)
    }
}

struct Best {
    cost: f64,
    u: Vec<bool>,
    v: Vec<bool>,
    plan: Vec<usize>,
}

/// Exact optimum of the integer model with every second-stage variable in
/// `0..=max_flow`, or `None` when that model is infeasible.
pub fn enumerate_optimal(
    inst: &Instance,
    scen: &ScenarioSet,
    cfg: &StrategyConfig,
    opts: &ModelOptions,
    max_flow: u32,
) -> Result<Option<OracleResult>, CoreError> {
    let report = crate::instance::validate_instance(inst, scen);
    if !report.is_valid() {
        return Err(CoreError::Invalid(report));
    }
    let d = Dims::new(inst, cfg);
    if opts.cap_mode == CapMode::Literal && d.scenarios > 1 {
        return Err(CoreError::Precondition(
            "the literal emission cap couples scenarios; enumeration supports it only with one scenario".into(),
        ));
    }
    let mut pairs = Vec::new();
    for link in LINKS {
        let (no, nd) = d.extent(link);
        for o in 0..no {
            for dd in 0..nd {
                pairs.push((link, o, dd));
            }
        }
    }
    let radix = d.modes + 1;
    let ub = max_flow;
    let n_min = -(ub as i64);
    let n_max = ub as i64 * if cfg.safety_stock { 2 } else { 1 };
    let range = (n_max - n_min + 1) as usize;

    // Guard before allocating anything large.
    let temps = (d.manufacturers - d.main_manufacturers) + (d.warehouses - d.main_warehouses);
    let f_count = (radix as f64).powi(pairs.len() as i32);
    let n_states = (range as f64).powi(d.manufacturers as i32);
    let base = ub as f64 + 1.0;
    let up_size = base.powi((d.suppliers * d.manufacturers + if cfg.stockpiling { d.manufacturers } else { 0 }) as i32);
    let down_size = base.powi(
        (d.retailers * d.warehouses.saturating_sub(1) + d.warehouses * d.manufacturers.saturating_sub(1)) as i32,
    );
    let estimate = 2f64.powi(temps as i32) * f_count.powi(d.periods as i32) * d.scenarios as f64 * n_states
        + d.periods as f64 * d.scenarios as f64 * f_count * up_size * down_size * n_states;
    if !(estimate <= SEARCH_LIMIT) {
        return Err(CoreError::SearchSpace {
            estimate,
            limit: SEARCH_LIMIT,
        });
    }
    let n_states = n_states as usize;

    let p = &inst.params;
    let has_mss = cfg.safety_stock;
    let mut hold = vec![vec![vec![None; range]; d.scenarios]; d.manufacturers];
    for j in 0..d.manufacturers {
        for s in 0..d.scenarios {
            let mss_range = if has_mss { ub } else { 0 };
            for mi in 0..=ub {
                for ms in 0..=ub {
                    for mss in 0..=mss_range {
                        let n = mi as i64 + mss as i64 - ms as i64;
                        let c = p.inv_cost[j][s] * (mi + mss) as f64 + p.short_cost[j][s] * ms as f64;
                        let slot = &mut hold[j][s][(n - n_min) as usize];
                        if slot.map_or(true, |(best, _)| c < best) {
                            *slot = Some((c, [mi, ms, mss]));
                        }
                    }
                }
            }
        }
    }
    let states: Vec<Vec<i64>> = (0..n_states)
        .map(|mut x| {
            (0..d.manufacturers)
                .map(|_| {
                    let v = (x % range) as i64 + n_min;
                    x /= range;
                    v
                })
                .collect()
        })
        .collect();
    let search = Search {
        inst,
        scen,
        cfg,
        opts,
        d,
        ub,
        pairs,
        radix,
        n_min,
        range,
        n_states,
        zero_state: 0,
        states,
        hold,
    };
    let zero_state = search.encode(&vec![0; d.manufacturers]);
    let search = Search { zero_state, ..search };

    let f_total = f_count as usize;
    let mut cache: Vec<Option<Vec<f64>>> = vec![None; d.periods * d.scenarios * f_total];
    let n_temp_m = d.manufacturers - d.main_manufacturers;
    let n_temp_w = d.warehouses - d.main_warehouses;
    let offset = if cfg.info_sharing {
        opts.weights.cost * (p.info_setup + p.info_training)
    } else {
        0.0
    };
    let mut best: Option<Best> = None;
    for mask in 0..(1usize << temps) {
        let u: Vec<bool> = (0..n_temp_m).map(|i| mask >> i & 1 == 1).collect();
        let v: Vec<bool> = (0..n_temp_w).map(|i| mask >> (n_temp_m + i) & 1 == 1).collect();
        let setup: f64 = u.iter().zip(&p.setup_temp_mfg).filter(|x| *x.0).map(|x| x.1).sum::<f64>()
            + v.iter().zip(&p.setup_temp_wh).filter(|x| *x.0).map(|x| x.1).sum::<f64>();
        let fixed = offset + opts.weights.cost * setup;
        let choices: Vec<(usize, f64)> = (0..f_total)
            .filter_map(|f| {
                let modes = search.modes_of(f);
                search
                    .first_stage_ok(&modes, &u, &v)
                    .then(|| (f, search.first_stage_cost(&modes)))
            })
            .collect();
        let mut start = vec![vec![f64::INFINITY; n_states]; d.scenarios];
        for w in &mut start {
            w[zero_state] = 0.0;
        }
        let mut plan = Vec::new();
        let incumbent = best.as_ref().map_or(f64::INFINITY, |b| b.cost);
        dive(&search, &mut cache, &choices, 0, &start, fixed, &mut plan, &mut |cost, plan| {
            if best.as_ref().map_or(true, |b| cost < b.cost) {
                best = Some(Best {
                    cost,
                    u: u.clone(),
                    v: v.clone(),
                    plan: plan.to_vec(),
                });
            }
            best.as_ref().map_or(f64::INFINITY, |b| b.cost)
        }, incumbent);
    }
    let Some(best) = best else { return Ok(None) };
    let assignment = rebuild(&search, &best);
    Ok(Some(OracleResult {
        objective: objective(inst, scen, cfg, opts, &assignment),
        assignment,
        estimate,
    }))
}

#[allow(clippy::too_many_arguments)]
fn dive(
    search: &Search,
    cache: &mut Vec<Option<Vec<f64>>>,
    choices: &[(usize, f64)],
    t: usize,
    w: &[Vec<f64>],
    partial: f64,
    plan: &mut Vec<usize>,
    record: &mut dyn FnMut(f64, &[usize]) -> f64,
    mut incumbent: f64,
) -> f64 {
    let d = &search.d;
    let floor: f64 = w
        .iter()
        .map(|ws| ws.iter().cloned().fold(f64::INFINITY, f64::min))
        .sum();
    if !floor.is_finite() || partial + floor >= incumbent {
        return incumbent;
    }
    if t == d.periods {
        return record(partial + floor, plan);
    }
    let n = search.n_states;
    let f_total = cache.len() / (d.periods * d.scenarios);
    for &(f, fcost) in choices {
        let mut next = Vec::with_capacity(d.scenarios);
        for (s, ws) in w.iter().enumerate() {
            let slot = (t * d.scenarios + s) * f_total + f;
            if cache[slot].is_none() {
                let modes = search.modes_of(f);
                cache[slot] = Some(search.transition(t, s, &modes).cost);
            }
            let tr = cache[slot].as_ref().expect("filled above");
            let mut out = vec![f64::INFINITY; n];
            for (from, &base) in ws.iter().enumerate() {
                if !base.is_finite() {
                    continue;
                }
                let row = &tr[from * n..(from + 1) * n];
                for (o, &c) in out.iter_mut().zip(row) {
                    let v = base + c;
                    if v < *o {
                        *o = v;
                    }
                }
            }
            next.push(out);
        }
        plan.push(f);
        incumbent = dive(search, cache, choices, t + 1, &next, partial + fcost, plan, record, incumbent);
        plan.pop();
    }
    incumbent
}

fn rebuild(search: &Search, best: &Best) -> Assignment {
    let d = search.d;
    let n = search.n_states;
    let mut a = Assignment::zeros(d);
    for (i, &u) in best.u.iter().enumerate() {
        a.open_mfg[i] = if u { 1.0 } else { 0.0 };
    }
    for (i, &v) in best.v.iter().enumerate() {
        a.open_wh[i] = if v { 1.0 } else { 0.0 };
    }
    let modes: Vec<Vec<Option<usize>>> = best.plan.iter().map(|&f| search.modes_of(f)).collect();
    for (t, m) in modes.iter().enumerate() {
        for (&(link, o, dd), mode) in search.pairs.iter().zip(m) {
            if let Some(l) = *mode {
                a.set_bin(link, o, dd, t, l, 1.0);
            }
        }
    }
    for s in 0..d.scenarios {
        let trans: Vec<Transition> = (0..d.periods).map(|t| search.transition(t, s, &modes[t])).collect();
        let mut w = vec![f64::INFINITY; n];
        w[search.zero_state] = 0.0;
        let mut pred = Vec::new();
        for tr in &trans {
            let mut out = vec![f64::INFINITY; n];
            let mut from_of = vec![usize::MAX; n];
            for from in 0..n {
                if !w[from].is_finite() {
                    continue;
                }
                for to in 0..n {
                    let v = w[from] + tr.cost[from * n + to];
                    if v < out[to] {
                        out[to] = v;
                        from_of[to] = from;
                    }
                }
            }
            pred.push(from_of);
            w = out;
        }
        let mut state = (0..n)
            .min_by(|&x, &y| w[x].total_cmp(&w[y]))
            .expect("at least one state");
        for t in (0..d.periods).rev() {
            let tr = &trans[t];
            let from = pred[t][state];
            let (di, ui) = tr.arg[from * n + state];
            let dn = &tr.down[di as usize];
            let un = &tr.up[ui as usize];
            for (&(k, m, l), &v) in tr.arcs[2].iter().zip(&dn.z) {
                a.set_flow(Link::WarehouseRetailer, k, m, t, l, s, v as f64);
            }
            for (&(j, k, l), &v) in tr.arcs[1].iter().zip(&dn.y) {
                a.set_flow(Link::ManufacturerWarehouse, j, k, t, l, s, v as f64);
            }
            for (&(i, j, l), &v) in tr.arcs[0].iter().zip(&un.x) {
                a.set_flow(Link::SupplierManufacturer, i, j, t, l, s, v as f64);
            }
            for j in 0..d.manufacturers {
                let at = a.stock_at(j, t, s);
                a.sp[at] = un.sp[j] as f64;
                let net = search.states[state][j];
                let (_, [mi, ms, mss]) = search.hold[j][s][(net - search.n_min) as usize].expect("reachable state");
                a.mi[at] = mi as f64;
                a.ms[at] = ms as f64;
                a.mss[at] = mss as f64;
            }
            state = from;
        }
    }
    a
}
