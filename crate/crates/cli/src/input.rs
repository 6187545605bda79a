use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use multiplex::{Config, EdgeList, MultiGraph};

/// Flags that select one village graph from an edge list.
#[derive(Args, Debug, Clone, Default)]
pub struct GraphArgs {
    /// Edge list with header `village,layer,src,dst`.
    #[arg(long)]
    pub edges: Option<PathBuf>,
    /// Layers to use, in order (defaults to the file's `# layers:` line).
    #[arg(long, value_delimiter = ',')]
    pub layers: Option<Vec<String>>,
    /// Node count (defaults to the file's `# nodes:` line).
    #[arg(long)]
    pub nodes: Option<usize>,
    /// Village to load when the file holds several.
    #[arg(long)]
    pub village: Option<String>,
}

pub struct LoadedGraph {
    pub graph: MultiGraph,
    pub village: String,
    pub path: PathBuf,
}

impl GraphArgs {
    pub fn load(&self) -> Result<LoadedGraph> {
        let path = self.edges.as_ref().context("--edges is required")?;
        load_graph(path, self.village.as_deref(), self.nodes, self.layers.as_deref())
    }

    /// Fills unset flags from `edges`, `village`, `nodes` and `layers` keys,
    /// resolving paths against the config's directory.
    pub fn fill_from(&mut self, cfg: &Config, base: &Path) -> Result<()> {
        if self.edges.is_none() {
            self.edges = cfg.get_str("edges").map(|p| base.join(p));
        }
        if self.village.is_none() {
            self.village = cfg.get_str("village").map(str::to_owned);
        }
        if self.nodes.is_none() {
            self.nodes = cfg.get("nodes")?;
        }
        if self.layers.is_none() {
            self.layers = cfg.get_list("layers")?;
        }
        Ok(())
    }

    pub fn record(&self, loaded: &LoadedGraph, cfg: &mut Config) {
        cfg.set("edges", loaded.path.display());
        cfg.set("village", &loaded.village);
        cfg.set("nodes", loaded.graph.node_count());
        cfg.set("layers", loaded.graph.layer_names().join(","));
    }
}

pub fn load_graph(path: &Path, village: Option<&str>, nodes: Option<usize>, layers: Option<&[String]>) -> Result<LoadedGraph> {
    let list = EdgeList::read_path(path).with_context(|| format!("cannot read edge list {}", path.display()))?;
    let village = pick_village(&list, village)?;
    let graph = match (&list.layers, layers) {
        (Some(_), Some(selected)) => list.graph(&village, nodes, None)?.select_layers(selected)?,
        (_, selected) => list.graph(&village, nodes, selected)?,
    };
    Ok(LoadedGraph {
        graph,
        village,
        path: path.to_owned(),
    })
}

fn pick_village(list: &EdgeList, requested: Option<&str>) -> Result<String> {
    let all = list.villages();
    match requested {
        Some(v) if all.iter().any(|x| x == v) => Ok(v.to_owned()),
        Some(v) => bail!("village `{v}` does not appear in the edge list"),
        None => match all.len() {
            0 => bail!("the edge list contains no villages"),
            1 => Ok(all[0].clone()),
            n => bail!("the edge list holds {n} villages; choose one with --village"),
        },
    }
}

pub fn read_config(path: Option<&Path>) -> Result<Config> {
    match path {
        Some(p) => Config::read_path(p).with_context(|| format!("cannot read config {}", p.display())),
        None => Ok(Config::default()),
    }
}

/// Directory that relative paths inside a config file are resolved against.
pub fn config_dir(path: Option<&Path>) -> PathBuf {
    path.and_then(Path::parent).map(Path::to_owned).unwrap_or_default()
}

/// Rejects keys that are neither listed nor of the form `<prefix>.<rest>`.
pub fn check_keys(cfg: &Config, what: &str, exact: &[&str], prefixes: &[&str]) -> Result<()> {
    for (key, _) in cfg.iter() {
        let dotted = prefixes
            .iter()
            .any(|p| key.strip_prefix(p).is_some_and(|rest| rest.starts_with('.') && rest.len() > 1));
        if !exact.contains(&key) && !dotted {
            bail!("unknown {what} config key `{key}`");
        }
    }
    Ok(())
}

/// The master seed from `--seed` or the config's `seed` key.
pub fn require_seed(flag: Option<u64>, cfg: &mut Config, subcommand: &str) -> Result<u64> {
    if let Some(s) = flag {
        cfg.set("seed", s);
    }
    match cfg.get::<u64>("seed")? {
        Some(s) => Ok(s),
        None => bail!("{subcommand} is stochastic and needs an explicit --seed"),
    }
}
