//! Fast evaluation of a routing (facility per demand unit) with the drone
//! allocation optimised for it.
//!
//! For fixed routing the allocation problem is
//! `min sum_r w_r max_j v_jr(k_j)` subject to `k_j >= m_j` and
//! `sum k_j <= K`, where `v_jr(k) = T_jr + W_jr(k)` is decreasing in k and
//! `T_jr` is the longest class-r travel time at j. It is solved exactly for
//! one class (greedy on the argmax) and for two classes (threshold sweep
//! over the class-1 values, with the class-2 min-max answered by a second
//! monotone pointer). More classes use greedy steps followed by single drone
//! moves. Spare drones left after the min-max are spent where they cut the
//! rate-weighted waiting time most.

use std::cmp::Ordering;

use crate::instance::{Instance, Mode};
use crate::queueing::{class_waits_into, min_stable_drones, streams, Assignment, FacilityLoad};

/// Relative tolerance under which two objective values count as tied.
pub const TIE_TOL: f64 = 1e-12;

/// Lexicographic solution quality: drones missing to stabilise every queue
/// (zero when feasible), objective, rate-weighted total wait, number of open
/// facilities. For infeasible routings `z` holds the total offered load.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Score {
    pub excess: u64,
    pub z: f64,
    pub total_wait: f64,
    pub open: usize,
}

fn tied(a: f64, b: f64) -> bool {
    (a - b).abs() <= TIE_TOL * a.abs().max(b.abs()).max(1.0)
}

impl Score {
    pub fn rank(&self, other: &Score) -> Ordering {
        if self.excess != other.excess {
            return self.excess.cmp(&other.excess);
        }
        if !tied(self.z, other.z) {
            return self.z.total_cmp(&other.z);
        }
        if !tied(self.total_wait, other.total_wait) {
            return self.total_wait.total_cmp(&other.total_wait);
        }
        self.open.cmp(&other.open)
    }

    pub fn better_than(&self, other: &Score) -> bool {
        self.rank(other) == Ordering::Less
    }

    pub fn feasible(&self) -> bool {
        self.excess == 0
    }
}

/// Demand that moves as one piece: a node (NP, DP) or a node's class (SP).
#[derive(Clone, Debug)]
pub struct Unit {
    pub node: usize,
    pub slot: usize,
    /// (class, rate) of the streams carried, in class order.
    pub streams: Vec<(usize, f64)>,
    /// Reachable facilities, nearest first.
    pub options: Vec<usize>,
}

/// What a routing is judged by.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Goal {
    /// Weighted min-max response time under a drone budget.
    Response,
    /// Total minimum stable drone count (the fleet-sizing side model).
    Fleet,
}

pub struct Evaluator<'a> {
    pub inst: &'a Instance,
    pub units: Vec<Unit>,
    pub budget: u32,
    pub goal: Goal,
    mode: Mode,
    classes: usize,
    m: usize,
    delta: Vec<f64>,
    weights: Vec<f64>,
}

/// Reusable buffers, one per search thread.
pub struct Scratch {
    loads: Vec<FacilityLoad>,
    /// Longest travel per (facility, class); negative when the class is absent.
    tmax: Vec<f64>,
    base: Vec<u32>,
    /// `v_jr(base_j + o)` at `(j * (spare + 1) + o) * classes + r`.
    vals: Vec<f64>,
    /// Rate-weighted wait of facility j at offset o.
    tw: Vec<f64>,
    waits: Vec<f64>,
    off: Vec<u32>,
    k1: Vec<u32>,
    k2: Vec<u32>,
    cand: Vec<f64>,
}

/// Evaluated routing.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluated {
    pub score: Score,
    pub drones: Vec<u32>,
}

impl<'a> Evaluator<'a> {
    pub fn new(inst: &'a Instance, budget: u32, goal: Goal) -> Self {
        let mode = inst.mode();
        let classes = inst.n_classes();
        let m = inst.n_facilities();
        let mut units: Vec<Unit> = Vec::new();
        for s in streams(inst) {
            let same = units.last().is_some_and(|u| u.node == s.node && u.slot == s.slot);
            if same {
                units.last_mut().unwrap().streams.push((s.class, s.rate));
            } else {
                let mut options: Vec<usize> = (0..m).filter(|&j| inst.reachable(s.node, j)).collect();
                options.sort_by(|&a, &b| {
                    inst.travel(s.node, a)
                        .total_cmp(&inst.travel(s.node, b))
                        .then(a.cmp(&b))
                });
                units.push(Unit {
                    node: s.node,
                    slot: s.slot,
                    streams: vec![(s.class, s.rate)],
                    options,
                });
            }
        }
        let p = inst.priority();
        let delta = (0..classes * classes)
            .map(|x| p.delta_a(x / classes, x % classes))
            .collect();
        Evaluator {
            inst,
            units,
            budget,
            goal,
            mode,
            classes,
            m,
            delta,
            weights: p.weights.clone(),
        }
    }

    pub fn n_facilities(&self) -> usize {
        self.m
    }

    pub fn scratch(&self) -> Scratch {
        Scratch {
            loads: vec![FacilityLoad::new(self.classes); self.m],
            tmax: vec![0.0; self.m * self.classes],
            base: vec![0; self.m],
            vals: Vec::new(),
            tw: Vec::new(),
            waits: vec![0.0; self.classes],
            off: vec![0; self.m],
            k1: vec![0; self.m],
            k2: vec![0; self.m],
            cand: Vec::new(),
        }
    }

    /// Facility loads and minimum stable drone counts; returns the sum of
    /// the minima and the number of used facilities.
    fn prepare(&self, route: &[usize], sc: &mut Scratch) -> (u64, usize) {
        for l in &mut sc.loads {
            l.arrival.fill(0.0);
            l.load.fill(0.0);
            l.second.fill(0.0);
        }
        sc.tmax.fill(f64::NEG_INFINITY);
        for (u, &j) in self.units.iter().zip(route) {
            let t = self.inst.travel(u.node, j);
            let s = self.inst.service(u.node, j);
            for &(c, rate) in &u.streams {
                sc.loads[j].add(c, rate, s);
                let slot = &mut sc.tmax[j * self.classes + c];
                *slot = slot.max(t);
            }
        }
        let mut total = 0u64;
        let mut open = 0usize;
        for j in 0..self.m {
            let used = sc.tmax[j * self.classes..(j + 1) * self.classes]
                .iter()
                .any(|t| *t > f64::NEG_INFINITY);
            sc.base[j] = if used {
                open += 1;
                min_stable_drones(sc.loads[j].total_load())
            } else {
                0
            };
            total += u64::from(sc.base[j]);
        }
        (total, open)
    }

    /// Scores a routing. Routings the budget cannot stabilise get a positive
    /// excess and the minimum stable drone counts.
    pub fn evaluate(&self, route: &[usize], sc: &mut Scratch) -> Evaluated {
        let (min_total, open) = self.prepare(route, sc);
        let over = min_total.saturating_sub(u64::from(self.budget));
        if self.goal == Goal::Fleet || over > 0 {
            let load: f64 = sc.loads.iter().map(|l| l.total_load()).sum();
            let (excess, z) = match self.goal {
                Goal::Fleet => (0, min_total as f64),
                Goal::Response => (over, load),
            };
            return Evaluated {
                score: Score {
                    excess,
                    z,
                    total_wait: load,
                    open,
                },
                drones: sc.base.clone(),
            };
        }
        self.allocate(self.budget - min_total as u32, open, sc)
    }

    fn fill_tables(&self, spare: u32, sc: &mut Scratch) {
        let width = spare as usize + 1;
        let c = self.classes;
        sc.vals.clear();
        sc.vals.resize(self.m * width * c, f64::NEG_INFINITY);
        sc.tw.clear();
        sc.tw.resize(self.m * width, 0.0);
        for j in 0..self.m {
            if sc.base[j] == 0 {
                continue;
            }
            for o in 0..width {
                let k = sc.base[j] + o as u32;
                class_waits_into(self.mode, &sc.loads[j], k, &self.delta, &mut sc.waits);
                let mut tw = 0.0;
                for r in 0..c {
                    let t = sc.tmax[j * c + r];
                    if t > f64::NEG_INFINITY {
                        sc.vals[(j * width + o) * c + r] = t + sc.waits[r];
                        tw += sc.loads[j].arrival[r] * sc.waits[r];
                    }
                }
                sc.tw[j * width + o] = tw;
            }
        }
    }

    fn allocate(&self, spare: u32, open: usize, sc: &mut Scratch) -> Evaluated {
        self.fill_tables(spare, sc);
        let width = spare as usize + 1;
        sc.off.fill(0);
        let used: Vec<usize> = (0..self.m).filter(|&j| sc.base[j] > 0).collect();
        if self.mode == Mode::Np || self.classes == 1 {
            self.minmax_single(spare, width, &used, sc);
        } else if self.classes == 2 {
            self.sweep_two(spare, width, &used, sc);
        } else {
            self.greedy_many(spare, width, &used, sc);
        }
        // Spare drones go where they cut total waiting most (the per-facility
        // totals are convex and decreasing in k, so greedy is optimal).
        let mut left = spare - sc.off.iter().sum::<u32>();
        while left > 0 {
            let mut best: Option<(f64, usize)> = None;
            for &j in &used {
                let o = sc.off[j] as usize;
                if o + 1 < width {
                    let gain = sc.tw[j * width + o] - sc.tw[j * width + o + 1];
                    if best.is_none_or(|(g, _)| gain > g) {
                        best = Some((gain, j));
                    }
                }
            }
            let Some((_, j)) = best else { break };
            sc.off[j] += 1;
            left -= 1;
        }
        let score = Score {
            excess: 0,
            z: self.z_at(width, &used, sc),
            total_wait: used.iter().map(|&j| sc.tw[j * width + sc.off[j] as usize]).sum(),
            open,
        };
        let drones = (0..self.m).map(|j| sc.base[j] + sc.off[j]).collect();
        Evaluated { score, drones }
    }

    fn val(&self, sc: &Scratch, width: usize, j: usize, o: usize, r: usize) -> f64 {
        sc.vals[(j * width + o) * self.classes + r]
    }

    /// Largest value over classes, used when all classes share one wait.
    fn val_any(&self, sc: &Scratch, width: usize, j: usize, o: usize) -> f64 {
        (0..self.classes)
            .map(|r| self.val(sc, width, j, o, r))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Class maxima at the current offsets combined as the queueing module
    /// does: max over classes for NP, weighted sum otherwise.
    fn z_at(&self, width: usize, used: &[usize], sc: &Scratch) -> f64 {
        let per_class = (0..self.classes).map(|r| {
            used.iter()
                .map(|&j| self.val(sc, width, j, sc.off[j] as usize, r))
                .fold(0.0, f64::max)
        });
        if self.mode == Mode::Np {
            per_class.fold(0.0, f64::max)
        } else {
            per_class.zip(&self.weights).map(|(z, w)| z * w).sum()
        }
    }

    /// Min-max over one value per facility: always feed the current argmax.
    fn minmax_single(&self, spare: u32, width: usize, used: &[usize], sc: &mut Scratch) {
        let mut left = spare;
        while left > 0 {
            let mut arg = None;
            let mut top = f64::NEG_INFINITY;
            for &j in used {
                let v = self.val_any(sc, width, j, sc.off[j] as usize);
                if v > top {
                    top = v;
                    arg = Some(j);
                }
            }
            let Some(j) = arg else { break };
            if sc.off[j] as usize + 1 >= width {
                break;
            }
            sc.off[j] += 1;
            left -= 1;
        }
        // Keep only what the optimum needs; the rest is spent on total wait.
        let z = used
            .iter()
            .map(|&j| self.val_any(sc, width, j, sc.off[j] as usize))
            .fold(f64::NEG_INFINITY, f64::max);
        for &j in used {
            sc.off[j] = (0..width)
                .find(|&o| self.val_any(sc, width, j, o) <= z)
                .unwrap_or(width - 1) as u32;
        }
    }

    /// Exact two-class allocation. For each class-1 threshold tau (taken
    /// from the attainable class-1 values, largest first) the least drones
    /// meeting it are `k1(tau)`; the smallest class-2 level v with
    /// `sum max(k1, k2(v)) <= spare` only grows as tau falls, so both scan
    /// once.
    fn sweep_two(&self, spare: u32, width: usize, used: &[usize], sc: &mut Scratch) {
        let has = |sc: &Scratch, j: usize, r: usize| sc.tmax[j * self.classes + r] > f64::NEG_INFINITY;
        let w1 = self.weights[0];
        let w2 = self.weights[1];
        // Ascending class-2 candidates.
        sc.cand.clear();
        for &j in used {
            if has(sc, j, 1) {
                for o in 0..width {
                    sc.cand.push(self.val(sc, width, j, o, 1));
                }
            }
        }
        let mut v_cands = std::mem::take(&mut sc.cand);
        v_cands.sort_unstable_by(f64::total_cmp);
        v_cands.dedup();
        let mut t_cands: Vec<f64> = Vec::new();
        for &j in used {
            if has(sc, j, 0) {
                for o in 0..width {
                    t_cands.push(self.val(sc, width, j, o, 0));
                }
            }
        }
        t_cands.sort_unstable_by(|a, b| b.total_cmp(a));
        t_cands.dedup();

        // Least offset reaching a level; `width` when unreachable.
        let need = |sc: &Scratch, j: usize, r: usize, level: f64| -> usize {
            (0..width)
                .find(|&o| self.val(sc, width, j, o, r) <= level)
                .unwrap_or(width)
        };
        if t_cands.is_empty() || v_cands.is_empty() {
            // Only one class has demand: plain min-max on it.
            self.minmax_single(spare, width, used, sc);
            sc.cand = v_cands;
            return;
        }

        // Offsets only move one way as tau falls and v rises, so each
        // facility's pointer is advanced at most `width` times overall.
        let mut best: Option<(f64, f64, f64)> = None; // (objective, tau, v)
        sc.k1.fill(0);
        sc.k2.fill(0);
        let mut vi = 0usize;
        for &j in used {
            sc.k2[j] = if has(sc, j, 1) {
                need(sc, j, 1, v_cands[0]) as u32
            } else {
                0
            };
        }
        'taus: for &tau in &t_cands {
            for &j in used {
                if has(sc, j, 0) {
                    let mut o = sc.k1[j] as usize;
                    while o < width && self.val(sc, width, j, o, 0) > tau {
                        o += 1;
                    }
                    if o >= width {
                        break 'taus;
                    }
                    sc.k1[j] = o as u32;
                }
            }
            if used.iter().map(|&j| sc.k1[j]).sum::<u32>() > spare {
                break;
            }
            loop {
                let total: u64 = used.iter().map(|&j| u64::from(sc.k1[j].max(sc.k2[j]))).sum();
                if total <= u64::from(spare) {
                    break;
                }
                vi += 1;
                if vi >= v_cands.len() {
                    break 'taus;
                }
                let v = v_cands[vi];
                for &j in used {
                    if has(sc, j, 1) {
                        let mut o = sc.k2[j] as usize;
                        while o > 0 && self.val(sc, width, j, o - 1, 1) <= v {
                            o -= 1;
                        }
                        sc.k2[j] = o as u32;
                    }
                }
            }
            let obj = w1 * tau + w2 * v_cands[vi];
            if best.is_none_or(|(b, _, _)| obj < b) {
                best = Some((obj, tau, v_cands[vi]));
            }
        }
        if let Some((_, tau, v)) = best {
            for &j in used {
                let a = if has(sc, j, 0) { need(sc, j, 0, tau) } else { 0 };
                let b = if has(sc, j, 1) { need(sc, j, 1, v) } else { 0 };
                sc.off[j] = a.max(b) as u32;
            }
        }
        sc.cand = v_cands;
    }

    /// Three or more classes: add drones one at a time where the weighted
    /// objective drops most, then try moving single drones between
    /// facilities until no move helps.
    fn greedy_many(&self, spare: u32, width: usize, used: &[usize], sc: &mut Scratch) {
        let mut left = spare;
        while left > 0 {
            let current = self.z_at(width, used, sc);
            let mut best: Option<(f64, f64, usize)> = None;
            for &j in used {
                let o = sc.off[j] as usize;
                if o + 1 >= width {
                    continue;
                }
                sc.off[j] += 1;
                let z = self.z_at(width, used, sc);
                sc.off[j] -= 1;
                let gain = sc.tw[j * width + o] - sc.tw[j * width + o + 1];
                let better = match best {
                    None => true,
                    Some((bz, bg, _)) => z < bz || (z == bz && gain > bg),
                };
                if better {
                    best = Some((z, gain, j));
                }
            }
            let Some((z, _, j)) = best else { break };
            if z >= current {
                // Plateau: the rest is spent on total waiting.
                break;
            }
            sc.off[j] += 1;
            left -= 1;
        }
        let mut improved = true;
        let mut rounds = 0;
        while improved && rounds < 4 * width {
            improved = false;
            rounds += 1;
            let current = self.z_at(width, used, sc);
            'scan: for &from in used {
                if sc.off[from] == 0 {
                    continue;
                }
                for &to in used {
                    if to == from || sc.off[to] as usize + 1 >= width {
                        continue;
                    }
                    sc.off[from] -= 1;
                    sc.off[to] += 1;
                    if self.z_at(width, used, sc) < current * (1.0 - TIE_TOL) {
                        improved = true;
                        break 'scan;
                    }
                    sc.off[from] += 1;
                    sc.off[to] -= 1;
                }
            }
        }
    }

    /// Full assignment for a routing; zero-rate SP slots follow the node's
    /// first routed slot.
    pub fn assignment(&self, route: &[usize], drones: Vec<u32>) -> Assignment {
        let slots = if self.mode == Mode::Sp { self.classes } else { 1 };
        let mut y: Vec<Vec<Option<usize>>> = vec![vec![None; slots]; self.inst.n_nodes()];
        for (u, &j) in self.units.iter().zip(route) {
            y[u.node][u.slot] = Some(j);
        }
        let y = y
            .into_iter()
            .map(|row| {
                let fill = row.iter().flatten().next().copied().unwrap_or(0);
                row.into_iter().map(|s| s.unwrap_or(fill)).collect()
            })
            .collect();
        Assignment::from_routes(y, drones)
    }

    /// Routing of an assignment (inverse of [`Evaluator::assignment`]).
    pub fn route_of(&self, asg: &Assignment) -> Vec<usize> {
        self.units.iter().map(|u| asg.y[u.node][u.slot]).collect()
    }
}
