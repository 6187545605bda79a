use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{bail, ensure, Context, Result};
use clap::Args;
use multiplex::centrality::{layer_centrality, CentralityOptions};
use multiplex::contagion::GridOutcome;
use multiplex::graph::LayerGraph;
use multiplex::multiplexity::{node_scores, village_score};
use multiplex::regress::{synth_rct, RctConfig};
use multiplex::stats::{backbone, layer_correlation, layer_stats};
use multiplex::villages::VillageModel;
use multiplex::{
    derive_seed, profile_distribution, Config, run_grid, simulate, solve_steady_state, stream, total_multiplexity_index, EdgeList,
    GridSpec, ProfileDistribution, SimConfig, SimResult, TransmissionModel,
};
use rayon::prelude::*;

use crate::input::{check_keys, config_dir, load_graph, read_config, require_seed, GraphArgs};
use crate::output::Report;

const MODEL_PREFIXES: [&str; 3] = ["q", "f2", "corr"];

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_owned(), |x| x.to_string())
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .context("cannot start worker threads")
}

#[derive(Args, Debug)]
pub struct StatsArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
}

pub fn stats(args: StatsArgs) -> Result<Report> {
    let mut report = Report::new("stats");
    let loaded = args.graph.load()?;
    let g = &loaded.graph;
    let mut table = String::from("layer,mean_degree,degree_sd,density,triangles,clustering\n");
    for name in g.layer_names() {
        let s = layer_stats(g, name)?;
        writeln!(
            table,
            "{name},{},{},{},{},{}",
            s.mean_degree, s.degree_sd, s.density, s.triangles, s.clustering
        )?;
    }
    report.stdout.push_str(&table);
    report.file("layer_stats.csv", table);
    if g.layer_count() >= 2 {
        let corr = layer_correlation(g)?;
        let mut table = format!("layer,{}\n", corr.layers.join(","));
        for (name, row) in corr.layers.iter().zip(&corr.values) {
            let cells: Vec<String> = row.iter().map(|&v| fmt_opt(v)).collect();
            writeln!(table, "{name},{}", cells.join(","))?;
        }
        report.stdout.push('\n');
        report.stdout.push_str(&table);
        report.file("correlation.csv", table);
    }
    args.graph.record(&loaded, &mut report.resolved);
    report.input(&loaded.path);
    Ok(report)
}

#[derive(Args, Debug)]
pub struct MpxArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    /// Two layers whose neighbor profiles are tabulated as `dA,dB,dAB,prob`.
    #[arg(long, value_delimiter = ',')]
    pub pair: Option<Vec<String>>,
}

pub fn mpx(args: MpxArgs) -> Result<Report> {
    let mut report = Report::new("mpx");
    let loaded = args.graph.load()?;
    let g = &loaded.graph;
    let score = village_score(g).context("village score is undefined")?;
    let summary = format!(
        "village,nodes,layers,village_score,total_multiplexity_index\n{},{},{},{},{}\n",
        loaded.village,
        g.node_count(),
        g.layer_count(),
        score,
        total_multiplexity_index(g)
    );
    let mut nodes = String::from("node,score\n");
    for (i, s) in node_scores(g).into_iter().enumerate() {
        writeln!(nodes, "{i},{}", fmt_opt(s))?;
    }
    report.stdout = format!("{summary}\n{nodes}");
    report.file("mpx_summary.csv", summary);
    report.file("mpx_nodes.csv", nodes);
    if let Some(pair) = &args.pair {
        ensure!(pair.len() == 2, "--pair takes exactly two layers");
        let mut buf = Vec::new();
        profile_distribution(g, &pair[0], &pair[1])?.write(&mut buf)?;
        report.file("profiles.csv", String::from_utf8(buf)?);
        report.resolved.set("pair", pair.join(","));
    }
    args.graph.record(&loaded, &mut report.resolved);
    report.input(&loaded.path);
    Ok(report)
}

#[derive(Args, Debug)]
pub struct CentralityArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    /// Layer to score.
    #[arg(long)]
    pub layer: String,
    /// Passing probability (defaults to one over the spectral radius).
    #[arg(long)]
    pub q: Option<f64>,
    /// Walk horizon (defaults to the layer's diameter).
    #[arg(long = "T", value_name = "T")]
    pub horizon: Option<usize>,
    /// Seed nodes whose summed centrality is reported.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<usize>>,
    /// Symmetrize the layer first.
    #[arg(long)]
    pub symmetrize: bool,
}

pub fn centrality(args: CentralityArgs) -> Result<Report> {
    let mut report = Report::new("centrality");
    let loaded = args.graph.load()?;
    let g = &loaded.graph;
    let opts = CentralityOptions {
        q: args.q,
        horizon: args.horizon,
        symmetrize: args.symmetrize,
    };
    let c = layer_centrality(g, &args.layer, &opts)?;
    let mut table = String::from("node,score\n");
    for (i, s) in c.centrality.scores.iter().enumerate() {
        writeln!(table, "{i},{s}")?;
    }
    let mut header = String::from("layer,q,T,lambda,diameter");
    let mut row = format!(
        "{},{},{},{},{}",
        args.layer,
        fmt_opt(c.centrality.q),
        c.centrality.horizon,
        c.lambda,
        c.diameter
    );
    if let Some(seeds) = &args.seeds {
        for &s in seeds {
            ensure!(s < g.node_count(), "seed {s} is not a node (graph has {} nodes)", g.node_count());
        }
        let total: f64 = seeds.iter().map(|&s| c.centrality.scores[s]).sum();
        header.push_str(",seed_set_dc");
        write!(row, ",{total}")?;
        report.resolved.set("seeds", seeds.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(","));
    }
    report.stdout = format!("{table}# {header}\n# {row}\n");
    report.file("centrality.csv", table);
    report.file("centrality_summary.csv", format!("{header}\n{row}\n"));
    report.resolved.set("layer", &args.layer);
    report.resolved.set("q", fmt_opt(args.q));
    report.resolved.set("T", args.horizon.map_or("default".into(), |t| t.to_string()));
    report.resolved.set("symmetrize", args.symmetrize);
    args.graph.record(&loaded, &mut report.resolved);
    report.input(&loaded.path);
    Ok(report)
}

#[derive(Args, Debug)]
pub struct BackboneArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    /// Number of principal components (defaults to two, or one for a single layer).
    #[arg(long, short = 'k')]
    pub components: Option<usize>,
}

pub fn backbone_cmd(args: BackboneArgs) -> Result<Report> {
    let mut report = Report::new("backbone");
    let loaded = args.graph.load()?;
    let g = &loaded.graph;
    let k = args.components.unwrap_or(g.layer_count().min(2));
    let b = backbone(g, k)?;
    let mut table = String::from("src,dst,weight\n");
    for (i, j, w) in &b.edges {
        writeln!(table, "{i},{j},{w}")?;
    }
    report.stdout = table.clone();
    report.file("backbone.csv", table);
    report.resolved.set("components", k);
    args.graph.record(&loaded, &mut report.resolved);
    report.input(&loaded.path);
    Ok(report)
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    /// Config with keys `q`, `q.<layer>`, `f2.<a>.<b>`, `corr.<a>.<b>`, `tau`,
    /// `delta`, `seed`, `seed_count`, `max_iters`, `stabilization_iters`,
    /// `convergence_tol`.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Transmission probability for layers without a `q.<layer>` key.
    #[arg(long)]
    pub q: Option<f64>,
    /// Transmissions needed within one period.
    #[arg(long)]
    pub tau: Option<u32>,
    /// Per-period recovery probability.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Explicit seed nodes; otherwise drawn uniformly in every replication.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<usize>>,
    /// Number of random seed nodes (defaults to the square root of n).
    #[arg(long)]
    pub seed_count: Option<usize>,
    /// Independent replications.
    #[arg(long, default_value_t = 1)]
    pub reps: usize,
    /// Master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
}

pub fn simulate_cmd(args: SimulateArgs) -> Result<Report> {
    let mut report = Report::new("simulate");
    let mut cfg = read_config(args.config.as_deref())?;
    check_keys(
        &cfg,
        "simulate",
        &["q", "tau", "delta", "seed", "seed_count", "max_iters", "stabilization_iters", "convergence_tol"],
        &MODEL_PREFIXES,
    )?;
    if let Some(q) = args.q {
        cfg.set("q", q);
    }
    if let Some(t) = args.tau {
        cfg.set("tau", t);
    }
    if let Some(d) = args.delta {
        cfg.set("delta", d);
    }
    if let Some(c) = args.seed_count {
        cfg.set("seed_count", c);
    }
    let seed = require_seed(args.seed, &mut cfg, "simulate")?;
    ensure!(args.reps > 0, "--reps must be at least 1");
    let loaded = args.graph.load()?;
    let g = &loaded.graph;
    let model = TransmissionModel::from_config(&cfg, g.layer_names())?;
    let d = SimConfig::default();
    let base = SimConfig {
        tau: cfg.get_or("tau", d.tau)?,
        delta: cfg.get_or("delta", d.delta)?,
        seed_count: cfg.get("seed_count")?,
        max_iters: cfg.get_or("max_iters", d.max_iters)?,
        convergence_tol: cfg.get_or("convergence_tol", d.convergence_tol)?,
        stabilization_iters: cfg.get_or("stabilization_iters", d.stabilization_iters)?,
        rng_seed: seed,
    };
    base.validate()?;
    let seeds = args.seeds.as_deref();
    let run = |rep: usize| -> multiplex::Result<SimResult> {
        let cfg = SimConfig {
            rng_seed: derive_seed(seed, &[rep as u64]),
            ..base.clone()
        };
        simulate(g, &model, &cfg, seeds)
    };
    let all = || (0..args.reps).into_par_iter().map(run).collect::<multiplex::Result<Vec<SimResult>>>();
    let results = if args.workers > 0 { pool(args.workers)?.install(all) } else { all() }?;
    let mut runs = String::from("rep,steady_share,periods_run,converged\n");
    for (rep, r) in results.iter().enumerate() {
        writeln!(runs, "{rep},{},{},{}", r.steady_share, r.periods_run, r.converged)?;
    }
    let mean = results.iter().map(|r| r.steady_share).sum::<f64>() / results.len() as f64;
    report.stdout = format!("{runs}# mean steady share over {} runs: {mean}\n", results.len());
    report.file("runs.csv", runs);
    if args.reps == 1 {
        let mut traj = String::from("period,infected_share\n");
        for (t, s) in results[0].trajectory.iter().enumerate() {
            writeln!(traj, "{},{s}", t + 1)?;
        }
        report.file("trajectory.csv", traj);
    }
    for (k, v) in cfg.iter() {
        report.resolved.set(k, v);
    }
    report.resolved.set("reps", args.reps);
    if let Some(s) = seeds {
        report.resolved.set("seeds", s.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(","));
    }
    args.graph.record(&loaded, &mut report.resolved);
    report.seed = Some(seed);
    report.input(&loaded.path);
    if let Some(p) = &args.config {
        report.input(p);
    }
    Ok(report)
}


#[derive(Args, Debug)]
pub struct GridArgs {
    /// Config with keys `tau`, `q_grid`, `delta_grid`, `reps`, `seed`,
    /// `seed_count`, and either `villages_path` (edge list of villages with
    /// three layers, optionally chosen with `layers`) or `synthetic_villages`
    /// with `village_size`.
    #[arg(long)]
    pub config: PathBuf,
    /// Master seed (overrides the config).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Replications per village and cell (overrides the config).
    #[arg(long)]
    pub reps: Option<usize>,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
}

pub fn grid(args: GridArgs) -> Result<Report> {
    let mut report = Report::new("grid");
    let mut cfg = read_config(Some(&args.config))?;
    check_keys(
        &cfg,
        "grid",
        &[
            "tau",
            "q_grid",
            "delta_grid",
            "reps",
            "seed",
            "seed_count",
            "villages_path",
            "layers",
            "synthetic_villages",
            "village_size",
        ],
        &[],
    )?;
    if let Some(r) = args.reps {
        cfg.set("reps", r);
    }
    let seed = require_seed(args.seed, &mut cfg, "grid")?;
    let villages = grid_villages(&cfg, &args.config, seed, &mut report)?;
    let spec = GridSpec {
        q_grid: cfg.get_list("q_grid")?.context("missing `q_grid`")?,
        delta_grid: cfg.get_list("delta_grid")?.context("missing `delta_grid`")?,
        tau: cfg.get_or("tau", 1)?,
        reps: cfg.require("reps")?,
        master_seed: seed,
        workers: args.workers,
        seed_count: cfg.get("seed_count")?,
    };
    let outcome = run_grid(&villages, &spec)?;
    let cells = cell_table(&outcome)?;
    let mut pooled = String::from("prevalence_bin,frac_mpx_higher,mean_prevalence,n_runs,wins,losses\n");
    for (bin, s) in outcome.pooled_by_bin() {
        writeln!(
            pooled,
            "{:.1},{},{},{},{},{}",
            bin as f64 / 10.0,
            s.frac_mpx_higher,
            s.mean_prevalence,
            s.n_runs,
            s.wins,
            s.losses
        )?;
    }
    report.stdout = format!("{cells}\n{pooled}");
    report.file("grid.csv", outcome.to_table());
    report.file("cells.csv", cells);
    report.file("pooled.csv", pooled);
    report.resolved = cfg;
    report.seed = Some(seed);
    report.input(&args.config);
    Ok(report)
}

fn cell_table(outcome: &GridOutcome) -> Result<String> {
    let mut out = String::from("q,delta,tau,frac_mpx_higher,mean_prevalence,n_runs,wins,losses\n");
    for (qi, q) in outcome.q_grid.iter().enumerate() {
        for (di, d) in outcome.delta_grid.iter().enumerate() {
            let s = outcome.cell_summary(qi, di);
            writeln!(
                out,
                "{q},{d},{},{},{},{},{},{}",
                outcome.tau, s.frac_mpx_higher, s.mean_prevalence, s.n_runs, s.wins, s.losses
            )?;
        }
    }
    Ok(out)
}

fn grid_villages(cfg: &Config, config_path: &std::path::Path, seed: u64, report: &mut Report) -> Result<Vec<[LayerGraph; 3]>> {
    let triple = |g: multiplex::MultiGraph| -> Result<[LayerGraph; 3]> {
        ensure!(
            g.layer_count() == 3,
            "grid villages need exactly three layers (got {}); choose them with `layers`",
            g.layer_count()
        );
        Ok([g.layer(0).clone(), g.layer(1).clone(), g.layer(2).clone()])
    };
    let layers = cfg.get_list::<String>("layers")?;
    match (cfg.get_str("villages_path"), cfg.get::<usize>("synthetic_villages")?) {
        (Some(_), Some(_)) => bail!("set either `villages_path` or `synthetic_villages`, not both"),
        (Some(p), None) => {
            let path = config_dir(Some(config_path)).join(p);
            let list = EdgeList::read_path(&path).with_context(|| format!("cannot read villages {}", path.display()))?;
            report.input(&path);
            list.villages()
                .iter()
                .map(|v| triple(load_graph(&path, Some(v), None, layers.as_deref())?.graph))
                .collect()
        }
        (None, Some(count)) => {
            let size: usize = cfg.require("village_size")?;
            let model = VillageModel::pair_experiment();
            (0..count as u64)
                .map(|v| triple(model.generate(size, &mut stream(seed, &[3, v]))?))
                .collect()
        }
        (None, None) => bail!("grid config needs `villages_path` or `synthetic_villages`"),
    }
}

#[derive(Args, Debug)]
pub struct MeanfieldArgs {
    /// Profile distribution with header `dA,dB,dAB,prob`.
    #[arg(long)]
    pub profiles: PathBuf,
    /// Config with keys `q`, `q.A`, `q.B`, `f2.A.B` or `corr.A.B`, `delta`, `tau`.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Transmission probability on both layers.
    #[arg(long)]
    pub q: Option<f64>,
    #[arg(long)]
    pub qa: Option<f64>,
    #[arg(long)]
    pub qb: Option<f64>,
    /// Probability of transmitting on both layers of a double link.
    #[arg(long, conflicts_with = "corr")]
    pub f2: Option<f64>,
    /// Correlation of the two layers' transmissions.
    #[arg(long)]
    pub corr: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub tau: Option<u32>,
}

pub fn meanfield(args: MeanfieldArgs) -> Result<Report> {
    let mut report = Report::new("meanfield");
    let mut cfg = read_config(args.config.as_deref())?;
    check_keys(&cfg, "meanfield", &["q", "delta", "tau"], &MODEL_PREFIXES)?;
    let flags = [
        ("q", args.q),
        ("q.A", args.qa),
        ("q.B", args.qb),
        ("f2.A.B", args.f2),
        ("corr.A.B", args.corr),
        ("delta", args.delta),
    ];
    for (key, value) in flags {
        if let Some(v) = value {
            cfg.set(key, v);
        }
    }
    if let Some(t) = args.tau {
        cfg.set("tau", t);
    }
    ensure!(
        !(cfg.contains("f2.A.B") && cfg.contains("corr.A.B")),
        "give either f2 or corr, not both"
    );
    let file = std::fs::File::open(&args.profiles)
        .with_context(|| format!("cannot open profiles {}", args.profiles.display()))?;
    let dist = ProfileDistribution::read(file, &args.profiles.display().to_string())?;
    let pair = TransmissionModel::from_config(&cfg, &["A", "B"])?.pair(0, 1);
    let delta: f64 = cfg.require("delta")?;
    let tau: u32 = cfg.get_or("tau", 1)?;
    let ss = solve_steady_state(&dist, delta, &pair, tau)?;
    let steady = format!("rho,residual,iterations\n{},{},{}\n", ss.rho, ss.residual, ss.iterations);
    let mut rates = String::from("dA,dB,dAB,prob,rate\n");
    for (p, m) in dist.iter() {
        let rate = ss.per_profile.get(&p).copied().unwrap_or(0.0);
        writeln!(rates, "{},{},{},{m},{rate}", p.only_a, p.only_b, p.both)?;
    }
    report.stdout = format!("{steady}\n{rates}");
    report.file("steady.csv", steady);
    report.file("per_profile.csv", rates);
    report.resolved = cfg;
    report.resolved.set("profiles", args.profiles.display());
    report.input(&args.profiles);
    if let Some(p) = &args.config {
        report.input(p);
    }
    Ok(report)
}

#[derive(Args, Debug)]
pub struct SynthRctArgs {
    /// Config with keys `villages`, `n_min`, `n_max`, `layer_model`, `q`,
    /// `delta`, `tau`, `horizon`, `worlds`, `seed`, `diffusion_layers`,
    /// `retention_scales`, `interaction_layer`, `precondition`,
    /// `standardize_controls`.
    #[arg(long)]
    pub config: PathBuf,
    /// Master seed (overrides the config).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of worlds (overrides the config).
    #[arg(long)]
    pub worlds: Option<usize>,
    /// Worker threads (0 = sequential).
    #[arg(long)]
    pub workers: Option<usize>,
}

pub fn synth_rct_cmd(args: SynthRctArgs) -> Result<Report> {
    let mut report = Report::new("synth-rct");
    let mut cfg = read_config(Some(&args.config))?;
    let seed = require_seed(args.seed, &mut cfg, "synth-rct")?;
    if let Some(w) = args.worlds {
        cfg.set("worlds", w);
    }
    if let Some(w) = args.workers {
        cfg.set("workers", w);
    }
    let rct = RctConfig::from_config(&cfg)?;
    let worlds = synth_rct(&rct)?;
    let mut summary = String::from("world,last_survivor,post_lasso_coefficient,interaction_coefficient\n");
    for w in &worlds {
        let survivor = w.last_survivor();
        let post = survivor.and_then(|s| w.post_lasso.as_ref()?.coefficient(&format!("dc_{s}")));
        writeln!(
            summary,
            "{},{},{},{}",
            w.world,
            survivor.unwrap_or("none"),
            fmt_opt(post),
            fmt_opt(w.interaction_coefficient())
        )?;
        let dir = format!("world_{:03}", w.world);
        report.file(format!("{dir}/outcomes.csv"), w.outcomes_table());
        report.file(format!("{dir}/design.csv"), w.design_table());
        report.file(format!("{dir}/lasso_path.csv"), w.lasso.to_table());
        report.file(format!("{dir}/ols.csv"), w.ols_table());
    }
    report.stdout = summary.clone();
    report.file("summary.csv", summary);
    report.resolved = cfg;
    report.seed = Some(seed);
    report.input(&args.config);
    Ok(report)
}
