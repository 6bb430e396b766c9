use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};

use super::{DemandNode, Facility, FleetParams, Instance, Mode, PriorityParams};
use crate::error::{Error, Result};

/// How request classes are attached to the generated nodes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClassLayout {
    Single,
    /// Every node requests every class; the class mix is a broken-stick draw
    /// (for two classes: v_1 ~ U(0,1), v_2 = 1 - v_1).
    Probabilistic {
        classes: usize,
    },
    /// `class1_count` randomly chosen nodes are class 1; the rest are spread
    /// uniformly over the remaining classes.
    Fixed {
        classes: usize,
        class1_count: usize,
    },
}

impl ClassLayout {
    pub fn classes(&self) -> usize {
        match *self {
            ClassLayout::Single => 1,
            ClassLayout::Probabilistic { classes } | ClassLayout::Fixed { classes, .. } => classes,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    /// Coordinates of nodes and facilities are drawn from U(lo, hi) km.
    pub coord_range: (f64, f64),
    pub lambda_range: (f64, f64),
    pub layout: ClassLayout,
    pub fleet: FleetParams,
    pub weights: Vec<f64>,
    #[serde(default)]
    pub initial_values: Vec<f64>,
}

/// Instance families used in the computational experiments.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// 10 nodes, 6 facilities, two classes mixed per node, lambda ~ U(0.6, 1).
    SpPaper,
    /// 11 nodes, 6 facilities, 6 class-1 nodes, lambda ~ U(0.1, 0.5).
    DpPaper,
}

impl Preset {
    pub fn config(self) -> GeneratorConfig {
        let fleet = FleetParams {
            speed: 80.0,
            endurance: 40.0,
            alpha: 0.1,
            k_hard_cap: Some(200),
            round_trip: false,
        };
        match self {
            Preset::SpPaper => GeneratorConfig {
                coord_range: (0.0, 30.0),
                lambda_range: (0.6, 1.0),
                layout: ClassLayout::Probabilistic { classes: 2 },
                fleet,
                weights: vec![0.7, 0.3],
                initial_values: Vec::new(),
            },
            Preset::DpPaper => GeneratorConfig {
                coord_range: (0.0, 30.0),
                lambda_range: (0.1, 0.5),
                layout: ClassLayout::Fixed {
                    classes: 2,
                    class1_count: 6,
                },
                fleet,
                weights: vec![0.7, 0.3],
                initial_values: vec![3.0, 0.0],
            },
        }
    }

    /// (nodes, facilities)
    pub fn sizes(self) -> (usize, usize) {
        match self {
            Preset::SpPaper => (10, 6),
            Preset::DpPaper => (11, 6),
        }
    }

    pub fn default_mode(self) -> Mode {
        match self {
            Preset::SpPaper => Mode::Sp,
            Preset::DpPaper => Mode::Dp,
        }
    }

    pub fn generate(self, seed: u64) -> Result<Instance> {
        let (n, m) = self.sizes();
        generate_instance(seed, n, m, self.default_mode(), &self.config())
    }
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sp-paper" => Ok(Preset::SpPaper),
            "dp-paper" => Ok(Preset::DpPaper),
            other => Err(Error::InvalidArgument(format!("unknown preset `{other}`"))),
        }
    }
}

/// Draws a random instance. The generator is xoshiro256++ seeded through
/// `seed_from_u64`, and the draw order is fixed (facility coordinates, then
/// per node: x, y, lambda, class mix; then the class-1 subset), so a seed
/// and config reproduce the same instance on every platform.
pub fn generate_instance(
    seed: u64,
    n_nodes: usize,
    n_facilities: usize,
    mode: Mode,
    config: &GeneratorConfig,
) -> Result<Instance> {
    if n_nodes == 0 || n_facilities == 0 {
        return Err(Error::InvalidArgument(
            "node and facility counts must be positive".into(),
        ));
    }
    let (c_lo, c_hi) = config.coord_range;
    let (l_lo, l_hi) = config.lambda_range;
    if !(c_lo < c_hi) || !(0.0 < l_lo && l_lo <= l_hi) {
        return Err(Error::InvalidArgument("empty coordinate or arrival-rate range".into()));
    }
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let uniform = |rng: &mut Xoshiro256PlusPlus, lo: f64, hi: f64| {
        if lo == hi {
            lo
        } else {
            rng.random_range(lo..hi)
        }
    };

    let facilities: Vec<Facility> = (0..n_facilities)
        .map(|id| Facility {
            id,
            coords: [uniform(&mut rng, c_lo, c_hi), uniform(&mut rng, c_lo, c_hi)],
        })
        .collect();

    let mut nodes = Vec::with_capacity(n_nodes);
    for id in 0..n_nodes {
        let coords = [uniform(&mut rng, c_lo, c_hi), uniform(&mut rng, c_lo, c_hi)];
        let lambda = uniform(&mut rng, l_lo, l_hi);
        let class_probs = match config.layout {
            ClassLayout::Probabilistic { classes } => Some(broken_stick(&mut rng, classes)),
            _ => None,
        };
        nodes.push(DemandNode {
            id,
            coords,
            lambda,
            class_probs,
            fixed_class: None,
        });
    }

    if let ClassLayout::Fixed { classes, class1_count } = config.layout {
        if class1_count > n_nodes {
            return Err(Error::InvalidArgument(format!(
                "cannot mark {class1_count} of {n_nodes} nodes as class 1"
            )));
        }
        let chosen = index::sample(&mut rng, n_nodes, class1_count);
        let mut is_first = vec![false; n_nodes];
        for i in chosen.iter() {
            is_first[i] = true;
        }
        for (node, first) in nodes.iter_mut().zip(is_first) {
            node.fixed_class = Some(if first || classes == 1 {
                1
            } else {
                rng.random_range(2..=classes)
            });
        }
    }

    let priority = PriorityParams {
        classes: config.layout.classes(),
        weights: config.weights.clone(),
        initial_values: config.initial_values.clone(),
    };

    let base_mode = match config.layout {
        ClassLayout::Fixed { .. } => Mode::Dp,
        ClassLayout::Probabilistic { .. } => Mode::Sp,
        ClassLayout::Single => Mode::Np,
    };
    let inst = Instance::new(base_mode, nodes, facilities, config.fleet.clone(), priority)?;
    if base_mode == mode {
        Ok(inst)
    } else {
        inst.with_mode(mode)
    }
}

fn broken_stick(rng: &mut Xoshiro256PlusPlus, classes: usize) -> Vec<f64> {
    if classes == 1 {
        return vec![1.0];
    }
    let mut cuts: Vec<f64> = (0..classes - 1).map(|_| rng.random::<f64>()).collect();
    cuts.sort_by(f64::total_cmp);
    let mut probs = Vec::with_capacity(classes);
    let mut prev = 0.0;
    for c in cuts {
        probs.push(c - prev);
        prev = c;
    }
    // The last share closes the stick so the vector sums to one.
    let head: f64 = probs.iter().sum();
    probs.push(1.0 - head);
    probs
}
