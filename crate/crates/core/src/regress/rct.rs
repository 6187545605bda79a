//! Synthetic seeding experiments: villages, random seed sets, diffusion, and
//! the layer-selection and interaction regressions on the resulting outcomes.

use rand::Rng;
use rayon::prelude::*;

use super::{
    interaction_regression, lasso_with_controls, ols, post_lasso_ols, DesignMatrix, LassoPath, OlsFit,
};
use crate::centrality::seed_set_dc;
use crate::config::Config;
use crate::contagion::{draw_seeds, ContagionNetwork};
use crate::error::{Error, Result};
use crate::graph::MultiGraph;
use crate::multiplexity::{high_mpx_flags, village_score};
use crate::transmission::TransmissionModel;
use crate::util::stream;
use crate::villages::VillageModel;

pub const CONTROL_NAMES: [&str; 5] = ["intercept", "households", "households_sq", "households_cu", "five_seeds"];

#[derive(Clone, Debug, PartialEq)]
pub struct RctConfig {
    pub villages: usize,
    pub n_min: usize,
    pub n_max: usize,
    /// `survey` or `pair`.
    pub layer_model: String,
    pub q: f64,
    pub delta: f64,
    pub tau: u32,
    pub horizon: usize,
    pub worlds: usize,
    pub seed: u64,
    /// Layers the diffusion runs on; all layers when `None`.
    pub diffusion_layers: Option<Vec<String>>,
    /// Each village draws one of these retention multipliers uniformly.
    pub retention_scales: Vec<f64>,
    /// Layer whose seed-set centrality enters the interaction regression.
    pub interaction_layer: String,
    pub precondition: bool,
    pub standardize_controls: bool,
    /// Worker threads; 0 uses the global pool.
    pub workers: usize,
}

impl Default for RctConfig {
    fn default() -> Self {
        RctConfig {
            villages: 68,
            n_min: 100,
            n_max: 250,
            layer_model: "survey".into(),
            q: 0.1,
            delta: 0.2,
            tau: 1,
            horizon: 8,
            worlds: 1,
            seed: 0,
            diffusion_layers: None,
            retention_scales: vec![1.0],
            interaction_layer: "advice".into(),
            precondition: true,
            standardize_controls: false,
            workers: 0,
        }
    }
}

impl RctConfig {
    /// Reads the keys `villages`, `n_min`, `n_max`, `layer_model`, `q`,
    /// `delta`, `tau`, `horizon`, `worlds`, `seed`, `diffusion_layers`,
    /// `retention_scales`, `interaction_layer`, `precondition`,
    /// `standardize_controls` and `workers`; absent keys keep their defaults
    /// except `seed`, which is required.
    pub fn from_config(cfg: &Config) -> Result<Self> {
        const KNOWN: [&str; 16] = [
            "villages",
            "n_min",
            "n_max",
            "layer_model",
            "q",
            "delta",
            "tau",
            "horizon",
            "worlds",
            "seed",
            "diffusion_layers",
            "retention_scales",
            "interaction_layer",
            "precondition",
            "standardize_controls",
            "workers",
        ];
        if let Some((k, _)) = cfg.iter().find(|(k, _)| !KNOWN.contains(k)) {
            return Err(Error::InvalidParameter(format!("unknown synth-rct key `{k}`")));
        }
        let d = RctConfig::default();
        let out = RctConfig {
            villages: cfg.get_or("villages", d.villages)?,
            n_min: cfg.get_or("n_min", d.n_min)?,
            n_max: cfg.get_or("n_max", d.n_max)?,
            layer_model: cfg.get_or("layer_model", d.layer_model)?,
            q: cfg.get_or("q", d.q)?,
            delta: cfg.get_or("delta", d.delta)?,
            tau: cfg.get_or("tau", d.tau)?,
            horizon: cfg.get_or("horizon", d.horizon)?,
            worlds: cfg.get_or("worlds", d.worlds)?,
            seed: cfg.require("seed")?,
            diffusion_layers: cfg.get_list("diffusion_layers")?,
            retention_scales: cfg.get_list("retention_scales")?.unwrap_or(d.retention_scales),
            interaction_layer: cfg.get_or("interaction_layer", d.interaction_layer)?,
            precondition: cfg.get_or("precondition", d.precondition)?,
            standardize_controls: cfg.get_or("standardize_controls", d.standardize_controls)?,
            workers: cfg.get_or("workers", d.workers)?,
        };
        out.validate()?;
        Ok(out)
    }

    pub fn village_model(&self) -> Result<VillageModel> {
        match self.layer_model.as_str() {
            "survey" => Ok(VillageModel::survey()),
            "pair" => Ok(VillageModel::pair_experiment()),
            other => Err(Error::InvalidParameter(format!(
                "unknown layer_model `{other}` (expected `survey` or `pair`)"
            ))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.into()));
        let model = self.village_model()?;
        if self.villages < 8 {
            return bad("synth-rct needs at least 8 villages");
        }
        if self.n_min < 6 || self.n_max < self.n_min {
            return bad("need 6 <= n_min <= n_max");
        }
        if !(0.0..=1.0).contains(&self.q) || !(0.0..=1.0).contains(&self.delta) {
            return bad("q and delta must lie in [0, 1]");
        }
        if self.tau == 0 {
            return bad("tau must be at least 1");
        }
        if self.worlds == 0 {
            return bad("worlds must be at least 1");
        }
        if self.retention_scales.is_empty() || self.retention_scales.iter().any(|s| !(*s >= 0.0)) {
            return bad("retention_scales must be a nonempty list of nonnegative numbers");
        }
        let names = model.layer_names();
        let check = |l: &String| {
            if names.contains(l) {
                Ok(())
            } else {
                Err(Error::UnknownLayer(l.clone()))
            }
        };
        check(&self.interaction_layer)?;
        if let Some(ls) = &self.diffusion_layers {
            if ls.is_empty() {
                return bad("diffusion_layers is empty");
            }
            ls.iter().try_for_each(check)?;
        }
        Ok(())
    }
}

/// One simulated village.
#[derive(Clone, Debug, PartialEq)]
pub struct VillageRecord {
    pub graph: MultiGraph,
    pub seeds: Vec<usize>,
    pub retention_scale: f64,
    /// Ever-infected households at the horizon, seeds included.
    pub informed: usize,
    /// Ever-infected non-seed households.
    pub calls: usize,
    pub score: f64,
    /// Raw seed-set diffusion centrality per layer.
    pub dc: Vec<f64>,
}

impl VillageRecord {
    pub fn households(&self) -> usize {
        self.graph.node_count()
    }

    pub fn calls_per_household(&self) -> f64 {
        self.calls as f64 / self.households() as f64
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WorldResult {
    pub world: usize,
    pub layer_names: Vec<String>,
    pub villages: Vec<VillageRecord>,
    /// Calls per household.
    pub outcome: Vec<f64>,
    /// Standardized seed-set centralities, one column per layer.
    pub layers: DesignMatrix,
    pub controls: DesignMatrix,
    pub high_mpx: Vec<bool>,
    pub lasso: LassoPath,
    pub full_ols: OlsFit,
    /// `None` when no layer enters the path.
    pub post_lasso: Option<OlsFit>,
    /// `None` when every village falls on the same side of the median.
    pub interaction: Option<OlsFit>,
}

impl WorldResult {
    pub fn last_survivor(&self) -> Option<&str> {
        self.lasso.last_survivor().map(|j| self.layer_names[j].as_str())
    }

    pub fn interaction_coefficient(&self) -> Option<f64> {
        self.interaction.as_ref().and_then(|f| f.coefficient("dc_x_high_mpx"))
    }

    /// `village,households,seed_count,seeds,retention_scale,score,high_mpx,informed,calls,calls_per_household`.
    pub fn outcomes_table(&self) -> String {
        let mut out = String::from(
            "village,households,seed_count,seeds,retention_scale,score,high_mpx,informed,calls,calls_per_household\n",
        );
        for (v, (r, h)) in self.villages.iter().zip(&self.high_mpx).enumerate() {
            let seeds: Vec<String> = r.seeds.iter().map(|s| s.to_string()).collect();
            out.push_str(&format!(
                "{v},{},{},{},{},{},{},{},{},{}\n",
                r.households(),
                r.seeds.len(),
                seeds.join(" "),
                r.retention_scale,
                r.score,
                *h as u8,
                r.informed,
                r.calls,
                r.calls_per_household()
            ));
        }
        out
    }

    /// Controls followed by the standardized layer columns, one row per village.
    pub fn design_table(&self) -> String {
        let names: Vec<&str> = self
            .controls
            .names()
            .iter()
            .chain(self.layers.names())
            .map(String::as_str)
            .collect();
        let mut out = format!("village,{}\n", names.join(","));
        for v in 0..self.layers.rows() {
            let row: Vec<String> = (0..self.controls.cols())
                .map(|j| self.controls.matrix()[(v, j)])
                .chain((0..self.layers.cols()).map(|j| self.layers.matrix()[(v, j)]))
                .map(|x| x.to_string())
                .collect();
            out.push_str(&format!("{v},{}\n", row.join(",")));
        }
        out
    }

    /// `model,variable,coefficient,std_error,p_value,r_squared` for every fit.
    pub fn ols_table(&self) -> String {
        let mut out = String::from("model,variable,coefficient,std_error,p_value,r_squared\n");
        let fits = [
            ("all_layers", Some(&self.full_ols)),
            ("post_lasso", self.post_lasso.as_ref()),
            ("interaction", self.interaction.as_ref()),
        ];
        for (model, fit) in fits {
            let Some(fit) = fit else { continue };
            for (j, name) in fit.names.iter().enumerate() {
                out.push_str(&format!(
                    "{model},{name},{},{},{},{}\n",
                    fit.coefficients[j], fit.std_errors[j], fit.p_values[j], fit.r_squared
                ));
            }
        }
        out
    }
}

fn control_matrix(villages: &[VillageRecord], standardize: bool) -> Result<DesignMatrix> {
    let hundreds: Vec<f64> = villages.iter().map(|r| r.households() as f64 / 100.0).collect();
    let powers = |k: i32| hundreds.iter().map(|x| x.powi(k)).collect::<Vec<f64>>();
    let mut columns = vec![powers(1), powers(2), powers(3)];
    columns.push(villages.iter().map(|r| (r.seeds.len() == 5) as u8 as f64).collect());
    let names = CONTROL_NAMES[1..].iter().map(|s| s.to_string()).collect();
    let mut x = DesignMatrix::new(names, columns)?;
    if standardize {
        x = x.standardized()?.0;
    }
    x.with_intercept()
}

fn simulate_village(cfg: &RctConfig, model: &VillageModel, world: usize, v: usize) -> Result<VillageRecord> {
    let path = |k: u64| [world as u64, v as u64, k];
    let mut rng = stream(cfg.seed, &path(0));
    let n = rng.random_range(cfg.n_min..=cfg.n_max);
    let retention_scale = cfg.retention_scales[rng.random_range(0..cfg.retention_scales.len())];
    let graph = model
        .with_retention_scale(retention_scale)
        .generate(n, &mut stream(cfg.seed, &path(1)))?;
    let mut rng = stream(cfg.seed, &path(2));
    let count = if rng.random::<bool>() { 5 } else { 3 };
    let seeds = draw_seeds(n, count, &mut rng)?;
    let informed = if cfg.q == 0.0 {
        seeds.len()
    } else {
        let diffusion = match &cfg.diffusion_layers {
            Some(ls) => graph.select_layers(ls)?,
            None => graph.clone(),
        };
        let transmission = TransmissionModel::uniform(diffusion.layer_count(), cfg.q)?;
        let ever = ContagionNetwork::new(&diffusion, &transmission)?.ever_infected(
            &seeds,
            cfg.tau,
            cfg.delta,
            cfg.horizon,
            &mut stream(cfg.seed, &path(3)),
        )?;
        ever.iter().filter(|&&e| e).count()
    };
    let dc = graph
        .layer_names()
        .iter()
        .map(|l| seed_set_dc(&graph, l, &seeds))
        .collect::<Result<Vec<f64>>>()?;
    Ok(VillageRecord {
        score: village_score(&graph)?,
        calls: informed - seeds.len(),
        informed,
        retention_scale,
        seeds,
        dc,
        graph,
    })
}

/// Builds and analyzes one world. Village `v` of world `w` draws its size and
/// retention multiplier from stream `[w, v, 0]`, its graph from `[w, v, 1]`,
/// its seeds from `[w, v, 2]` and its diffusion from `[w, v, 3]`.
pub fn run_world(cfg: &RctConfig, world: usize) -> Result<WorldResult> {
    cfg.validate()?;
    let model = cfg.village_model()?;
    let villages = (0..cfg.villages)
        .map(|v| simulate_village(cfg, &model, world, v))
        .collect::<Result<Vec<_>>>()?;
    analyze_world(world, model.layer_names(), villages, cfg)
}

/// Runs the regressions on simulated villages.
pub fn analyze_world(
    world: usize,
    layer_names: Vec<String>,
    villages: Vec<VillageRecord>,
    cfg: &RctConfig,
) -> Result<WorldResult> {
    let outcome: Vec<f64> = villages.iter().map(VillageRecord::calls_per_household).collect();
    let raw = DesignMatrix::new(
        layer_names.iter().map(|l| format!("dc_{l}")).collect(),
        (0..layer_names.len())
            .map(|l| villages.iter().map(|r| r.dc[l]).collect())
            .collect(),
    )?;
    let (layers, _, _) = raw.standardized()?;
    let controls = control_matrix(&villages, cfg.standardize_controls)?;
    let lasso = lasso_with_controls(&layers, &controls, &outcome, cfg.precondition, None)?;
    let full_ols = ols(&outcome, &controls.hstack(&layers)?)?;
    let post_lasso = lasso
        .last_survivor()
        .map(|j| post_lasso_ols(&layers, &controls, &outcome, &[j]))
        .transpose()?;
    let scores: Vec<f64> = villages.iter().map(|r| r.score).collect();
    let high_mpx = high_mpx_flags(&scores);
    let focus = layer_names
        .iter()
        .position(|l| *l == cfg.interaction_layer)
        .ok_or_else(|| Error::UnknownLayer(cfg.interaction_layer.clone()))?;
    let dc = layers.matrix().column(focus).iter().copied().collect::<Vec<f64>>();
    let without_intercept = controls.select(&CONTROL_NAMES[1..])?;
    let interaction = match interaction_regression(&outcome, &dc, &high_mpx, &without_intercept) {
        Ok(fit) => Some(fit),
        Err(Error::Precondition(msg)) => {
            log::warn!("world {world}: {msg}");
            None
        }
        Err(e) => return Err(e),
    };
    Ok(WorldResult {
        world,
        layer_names,
        villages,
        outcome,
        layers,
        controls,
        high_mpx,
        lasso,
        full_ols,
        post_lasso,
        interaction,
    })
}

/// Runs every world, in parallel across worlds.
pub fn synth_rct(cfg: &RctConfig) -> Result<Vec<WorldResult>> {
    cfg.validate()?;
    let task = |w: usize| run_world(cfg, w);
    let results: Vec<Result<WorldResult>> = if cfg.workers == 0 {
        (0..cfg.worlds).into_par_iter().map(task).collect()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build()
            .map_err(|e| Error::InvalidParameter(e.to_string()))?
            .install(|| (0..cfg.worlds).into_par_iter().map(task).collect())
    };
    results.into_iter().collect()
}
