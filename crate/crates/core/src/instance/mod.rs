//! Problem data: demand nodes, candidate facilities, fleet and priority
//! parameters, and the derived travel-time matrix.
//!
//! Units are fixed throughout the crate: coordinates in kilometres, speed in
//! km/h (converted once), every time quantity in minutes and arrival rates in
//! requests per minute.

mod generate;
mod io;

use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub use generate::{generate_instance, ClassLayout, GeneratorConfig, Preset};
pub use io::{read_instance, write_instance, InstanceFile, SCHEMA_VERSION};

/// Tolerance used when checking that probability vectors and weights sum to one.
pub const SUM_TOLERANCE: f64 = 1e-12;

/// Which queueing discipline (and therefore which model) an instance is
/// meant for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// First-come-first-served, no priorities.
    Np,
    /// Static non-preemptive priority; classes drawn per request.
    Sp,
    /// Delay-dependent non-preemptive priority; one class per node.
    Dp,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Np => "np",
            Mode::Sp => "sp",
            Mode::Dp => "dp",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "np" => Ok(Mode::Np),
            "sp" => Ok(Mode::Sp),
            "dp" => Ok(Mode::Dp),
            other => Err(Error::InvalidArgument(format!("unknown mode `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DemandNode {
    pub id: usize,
    /// Planar position in km.
    pub coords: [f64; 2],
    /// Poisson arrival rate, requests per minute.
    pub lambda: f64,
    /// Probability of each request belonging to class r (static priority).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_probs: Option<Vec<f64>>,
    /// 1-based priority class of every request from this node (dynamic priority).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_class: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Facility {
    pub id: usize,
    pub coords: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FleetParams {
    /// Drone cruise speed, km/h.
    pub speed: f64,
    /// Maximum one-way flight time, minutes.
    pub endurance: f64,
    /// Budget slack over the minimum stable fleet.
    pub alpha: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_hard_cap: Option<u32>,
    /// Charge a return leg as part of the service time (service = 2 t_ij).
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub round_trip: bool,
}

impl Default for FleetParams {
    fn default() -> Self {
        FleetParams {
            speed: 80.0,
            endurance: 40.0,
            alpha: 0.1,
            k_hard_cap: Some(200),
            round_trip: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorityParams {
    pub classes: usize,
    pub weights: Vec<f64>,
    /// Initial priority values a_r of the delay-dependent discipline. The
    /// slope of every class is fixed at one.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub initial_values: Vec<f64>,
}

impl PriorityParams {
    pub fn single_class() -> Self {
        PriorityParams {
            classes: 1,
            weights: vec![1.0],
            initial_values: Vec::new(),
        }
    }

    /// Initial priority gap a_l - a_r (zero-based class indices); zero when no
    /// initial values are configured.
    pub fn delta_a(&self, l: usize, r: usize) -> f64 {
        if self.initial_values.is_empty() {
            0.0
        } else {
            self.initial_values[l] - self.initial_values[r]
        }
    }
}

/// A validated problem instance. Immutable once built; the travel matrix is
/// derived from the coordinates and speed.
#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    mode: Mode,
    nodes: Vec<DemandNode>,
    facilities: Vec<Facility>,
    fleet: FleetParams,
    priority: PriorityParams,
    travel: Vec<Vec<f64>>,
}

/// Travel times in minutes: `60 * distance / speed`.
pub fn compute_travel_matrix(nodes: &[DemandNode], facilities: &[Facility], speed: f64) -> Vec<Vec<f64>> {
    nodes
        .iter()
        .map(|n| {
            facilities
                .iter()
                .map(|f| {
                    let dx = n.coords[0] - f.coords[0];
                    let dy = n.coords[1] - f.coords[1];
                    60.0 * dx.hypot(dy) / speed
                })
                .collect()
        })
        .collect()
}

impl Instance {
    pub fn new(
        mode: Mode,
        nodes: Vec<DemandNode>,
        facilities: Vec<Facility>,
        fleet: FleetParams,
        priority: PriorityParams,
    ) -> Result<Self> {
        validate(mode, &nodes, &facilities, &fleet, &priority)?;
        let travel = compute_travel_matrix(&nodes, &facilities, fleet.speed);
        Ok(Instance {
            mode,
            nodes,
            facilities,
            fleet,
            priority,
            travel,
        })
    }

    /// Builds an instance directly from a travel-time matrix (minutes). The
    /// coordinates are kept as given and are not used for travel times;
    /// handy for hand-built test cases.
    pub fn with_travel_times(
        mode: Mode,
        nodes: Vec<DemandNode>,
        travel: Vec<Vec<f64>>,
        fleet: FleetParams,
        priority: PriorityParams,
    ) -> Result<Self> {
        let n_fac = travel.first().map_or(0, Vec::len);
        let facilities = (0..n_fac)
            .map(|id| Facility { id, coords: [0.0, 0.0] })
            .collect::<Vec<_>>();
        validate(mode, &nodes, &facilities, &fleet, &priority)?;
        if travel.len() != nodes.len() || travel.iter().any(|row| row.len() != n_fac) {
            return Err(Error::Validation(
                "travel matrix shape must be nodes x facilities".into(),
            ));
        }
        if travel.iter().flatten().any(|t| !t.is_finite() || *t < 0.0) {
            return Err(Error::Validation("travel times must be finite and nonnegative".into()));
        }
        Ok(Instance {
            mode,
            nodes,
            facilities,
            fleet,
            priority,
            travel,
        })
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn nodes(&self) -> &[DemandNode] {
        &self.nodes
    }

    pub fn facilities(&self) -> &[Facility] {
        &self.facilities
    }

    pub fn fleet(&self) -> &FleetParams {
        &self.fleet
    }

    pub fn priority(&self) -> &PriorityParams {
        &self.priority
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_facilities(&self) -> usize {
        self.facilities.len()
    }

    pub fn n_classes(&self) -> usize {
        self.priority.classes
    }

    pub fn travel(&self, i: usize, j: usize) -> f64 {
        self.travel[i][j]
    }

    pub fn travel_matrix(&self) -> &[Vec<f64>] {
        &self.travel
    }

    /// Time a drone is occupied by one request from node i at facility j.
    pub fn service(&self, i: usize, j: usize) -> f64 {
        if self.fleet.round_trip {
            2.0 * self.travel[i][j]
        } else {
            self.travel[i][j]
        }
    }

    pub fn reachable(&self, i: usize, j: usize) -> bool {
        self.travel[i][j] <= self.fleet.endurance
    }

    /// Probability that a request of node i is of (zero-based) class r.
    pub fn class_prob(&self, i: usize, r: usize) -> f64 {
        let node = &self.nodes[i];
        if let Some(p) = &node.class_probs {
            p[r]
        } else if let Some(c) = node.fixed_class {
            if c == r + 1 {
                1.0
            } else {
                0.0
            }
        } else if r == 0 {
            1.0
        } else {
            0.0
        }
    }

    /// Arrival rate of class-r requests at node i.
    pub fn class_rate(&self, i: usize, r: usize) -> f64 {
        self.nodes[i].lambda * self.class_prob(i, r)
    }

    /// Zero-based class of a node with a fixed class (class 0 when the node
    /// has none).
    pub fn node_class(&self, i: usize) -> usize {
        self.nodes[i].fixed_class.map_or(0, |c| c - 1)
    }

    /// Nodes that cannot reach any facility within the drone endurance.
    pub fn unreachable_nodes(&self) -> Vec<usize> {
        (0..self.n_nodes())
            .filter(|&i| !(0..self.n_facilities()).any(|j| self.reachable(i, j)))
            .collect()
    }

    /// Same data under another model. Dynamic-priority nodes converted to
    /// static priority get one-hot class probabilities; static to dynamic
    /// only works for one-hot probabilities.
    pub fn with_mode(&self, mode: Mode) -> Result<Instance> {
        let mut nodes = self.nodes.clone();
        match mode {
            Mode::Np => {}
            Mode::Sp => {
                let classes = self.priority.classes;
                for (i, node) in nodes.iter_mut().enumerate() {
                    if node.class_probs.is_none() {
                        node.class_probs = Some((0..classes).map(|r| self.class_prob(i, r)).collect());
                        node.fixed_class = None;
                    }
                }
            }
            Mode::Dp => {
                for node in nodes.iter_mut() {
                    if let Some(p) = node.class_probs.take() {
                        let hot = p.iter().position(|&v| v == 1.0);
                        match hot {
                            Some(r) if p.iter().filter(|&&v| v != 0.0).count() == 1 => node.fixed_class = Some(r + 1),
                            _ => {
                                return Err(Error::Validation(format!(
                                    "node {} has mixed class probabilities; cannot fix its class",
                                    node.id
                                )))
                            }
                        }
                    }
                }
            }
        }
        let mut priority = self.priority.clone();
        if mode == Mode::Dp && priority.initial_values.is_empty() {
            priority.initial_values = vec![0.0; priority.classes];
        }
        self.rebuild(mode, nodes, self.fleet.clone(), priority)
    }

    pub fn with_weights(&self, weights: Vec<f64>) -> Result<Instance> {
        let mut priority = self.priority.clone();
        priority.weights = weights;
        self.rebuild(self.mode, self.nodes.clone(), self.fleet.clone(), priority)
    }

    pub fn with_initial_values(&self, initial_values: Vec<f64>) -> Result<Instance> {
        let mut priority = self.priority.clone();
        priority.initial_values = initial_values;
        self.rebuild(self.mode, self.nodes.clone(), self.fleet.clone(), priority)
    }

    /// Two-class shortcut: a = (delta, 0).
    pub fn with_delta_a(&self, delta: f64) -> Result<Instance> {
        if self.priority.classes != 2 {
            return Err(Error::InvalidArgument(
                "delta_a shortcut needs exactly two classes".into(),
            ));
        }
        self.with_initial_values(vec![delta, 0.0])
    }

    pub fn with_fleet(&self, fleet: FleetParams) -> Result<Instance> {
        self.rebuild(self.mode, self.nodes.clone(), fleet, self.priority.clone())
    }

    fn rebuild(
        &self,
        mode: Mode,
        nodes: Vec<DemandNode>,
        fleet: FleetParams,
        priority: PriorityParams,
    ) -> Result<Instance> {
        validate(mode, &nodes, &self.facilities, &fleet, &priority)?;
        let travel = if fleet.speed == self.fleet.speed {
            self.travel.clone()
        } else {
            compute_travel_matrix(&nodes, &self.facilities, fleet.speed)
        };
        Ok(Instance {
            mode,
            nodes,
            facilities: self.facilities.clone(),
            fleet,
            priority,
            travel,
        })
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn content_hash(&self) -> String {
        let json = serde_json::to_vec(&InstanceFile::from(self)).expect("instance serializes");
        let digest = Sha256::digest(&json);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn validate(
    mode: Mode,
    nodes: &[DemandNode],
    facilities: &[Facility],
    fleet: &FleetParams,
    priority: &PriorityParams,
) -> Result<()> {
    let fail = |msg: String| Err(Error::Validation(msg));
    if nodes.is_empty() {
        return fail("instance needs at least one demand node".into());
    }
    if facilities.is_empty() {
        return fail("instance needs at least one candidate facility".into());
    }
    if !(fleet.speed > 0.0 && fleet.speed.is_finite()) {
        return fail("speed must be positive".into());
    }
    if !(fleet.endurance > 0.0) {
        return fail("endurance must be positive".into());
    }
    if !(fleet.alpha >= 0.0 && fleet.alpha.is_finite()) {
        return fail("alpha must be nonnegative".into());
    }
    let r = priority.classes;
    if r == 0 {
        return fail("classes must be at least 1".into());
    }
    if priority.weights.len() != r {
        return fail(format!("weights must have {r} entries"));
    }
    if priority.weights.iter().any(|&w| !(w >= 0.0)) {
        return fail("weights must be nonnegative".into());
    }
    if (priority.weights.iter().sum::<f64>() - 1.0).abs() > SUM_TOLERANCE {
        return fail("weights must sum to 1".into());
    }
    if !priority.initial_values.is_empty() {
        if priority.initial_values.len() != r {
            return fail(format!("initial_values must have {r} entries"));
        }
        if priority.initial_values.iter().any(|a| !a.is_finite()) {
            return fail("initial_values must be finite".into());
        }
    }
    if mode == Mode::Dp {
        if priority.initial_values.len() != r {
            return fail("dynamic priority needs initial_values for every class".into());
        }
        // a_1 > a_2 > ... > a_R, relaxed to >= so that equal values (the
        // FCFS limit) stay expressible.
        if priority.initial_values.windows(2).any(|w| w[0] < w[1]) {
            return fail("initial_values must be nonincreasing in class index".into());
        }
    }
    for (idx, f) in facilities.iter().enumerate() {
        if f.id != idx {
            return fail(format!(
                "facility ids must be contiguous from 0; found {} at position {idx}",
                f.id
            ));
        }
        if f.coords.iter().any(|c| !c.is_finite()) {
            return fail(format!("facility {idx} has non-finite coordinates"));
        }
    }
    for (idx, n) in nodes.iter().enumerate() {
        if n.id != idx {
            return fail(format!(
                "node ids must be contiguous from 0; found {} at position {idx}",
                n.id
            ));
        }
        if n.coords.iter().any(|c| !c.is_finite()) {
            return fail(format!("node {idx} has non-finite coordinates"));
        }
        if !(n.lambda > 0.0 && n.lambda.is_finite()) {
            return fail(format!("node {idx}: lambda must be positive"));
        }
        if n.class_probs.is_some() && n.fixed_class.is_some() {
            return fail(format!("node {idx}: only one of class_probs / fixed_class may be set"));
        }
        if let Some(p) = &n.class_probs {
            if p.len() != r {
                return fail(format!("node {idx}: class_probs must have {r} entries"));
            }
            if p.iter().any(|&v| !(v >= 0.0)) {
                return fail(format!("node {idx}: class_probs must be nonnegative"));
            }
            if (p.iter().sum::<f64>() - 1.0).abs() > SUM_TOLERANCE {
                return fail(format!("node {idx}: class_probs must sum to 1"));
            }
        }
        if let Some(c) = n.fixed_class {
            if c == 0 || c > r {
                return fail(format!("node {idx}: fixed_class must lie in 1..={r}"));
            }
        }
        match mode {
            Mode::Sp if n.class_probs.is_none() => {
                return fail(format!("node {idx}: static priority needs class_probs"));
            }
            Mode::Dp if n.fixed_class.is_none() => {
                return fail(format!("node {idx}: dynamic priority needs fixed_class"));
            }
            Mode::Np if r > 1 && n.class_probs.is_none() && n.fixed_class.is_none() => {
                return fail(format!("node {idx}: class information missing for {r} classes"));
            }
            _ => {}
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn node(id: usize, coords: [f64; 2], lambda: f64) -> DemandNode {
        DemandNode {
            id,
            coords,
            lambda,
            class_probs: None,
            fixed_class: None,
        }
    }

    fn np_instance(nodes: Vec<DemandNode>, facilities: Vec<[f64; 2]>) -> Result<Instance> {
        let facilities = facilities
            .into_iter()
            .enumerate()
            .map(|(id, coords)| Facility { id, coords })
            .collect();
        Instance::new(
            Mode::Np,
            nodes,
            facilities,
            FleetParams::default(),
            PriorityParams::single_class(),
        )
    }

    #[test]
    fn travel_three_four_five() {
        let inst = np_instance(vec![node(0, [0.0, 0.0], 0.5)], vec![[3.0, 4.0]]).unwrap();
        assert!((inst.travel(0, 0) - 3.75).abs() < 1e-12);
    }

    #[test]
    fn travel_colocated_is_zero() {
        let inst = np_instance(vec![node(0, [7.0, 2.0], 0.5)], vec![[7.0, 2.0]]).unwrap();
        assert_eq!(inst.travel(0, 0), 0.0);
    }

    #[test]
    fn travel_box_diagonal() {
        let inst = np_instance(vec![node(0, [0.0, 0.0], 0.5)], vec![[30.0, 30.0]]).unwrap();
        let expected = 60.0 * (1800.0f64).sqrt() / 80.0;
        assert!((inst.travel(0, 0) - expected).abs() < 1e-12);
        assert!((inst.travel(0, 0) - 31.819805153394636).abs() < 1e-9);
        assert!(inst.reachable(0, 0));
    }

    #[test]
    fn rejects_bad_lambda_and_probs() {
        assert!(np_instance(vec![node(0, [0.0, 0.0], 0.0)], vec![[1.0, 1.0]]).is_err());
        let mut n = node(0, [0.0, 0.0], 0.5);
        n.class_probs = Some(vec![0.5, 0.4]);
        let priority = PriorityParams {
            classes: 2,
            weights: vec![0.7, 0.3],
            initial_values: vec![],
        };
        let err = Instance::new(
            Mode::Sp,
            vec![n],
            vec![Facility {
                id: 0,
                coords: [0.0, 0.0],
            }],
            FleetParams::default(),
            priority,
        )
        .unwrap_err();
        assert!(err.to_string().contains("class_probs must sum to 1"), "{err}");
    }

    #[test]
    fn unreachable_node_is_reported() {
        let fleet = FleetParams {
            endurance: 1.0,
            ..FleetParams::default()
        };
        let inst = Instance::new(
            Mode::Np,
            vec![node(0, [0.0, 0.0], 0.5)],
            vec![Facility {
                id: 0,
                coords: [20.0, 0.0],
            }],
            fleet,
            PriorityParams::single_class(),
        )
        .unwrap();
        assert_eq!(inst.unreachable_nodes(), vec![0]);
    }

    #[test]
    fn dp_to_sp_gives_one_hot() {
        let mut a = node(0, [0.0, 0.0], 0.3);
        a.fixed_class = Some(2);
        let inst = Instance::new(
            Mode::Dp,
            vec![a],
            vec![Facility {
                id: 0,
                coords: [1.0, 0.0],
            }],
            FleetParams::default(),
            PriorityParams {
                classes: 2,
                weights: vec![0.7, 0.3],
                initial_values: vec![3.0, 0.0],
            },
        )
        .unwrap();
        let sp = inst.with_mode(Mode::Sp).unwrap();
        assert_eq!(sp.nodes()[0].class_probs.as_deref(), Some(&[0.0, 1.0][..]));
        let back = sp.with_mode(Mode::Dp).unwrap();
        assert_eq!(back.nodes()[0].fixed_class, Some(2));
        assert_eq!(inst.priority().delta_a(0, 1), 3.0);
    }
}
