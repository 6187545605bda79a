use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{bail, ensure, Context, Result};
use clap::Args;
use multiplex::meanfield::{Status, PropositionReport};
use multiplex::multiplexity::{demultiplex_distribution, enumerate_demultiplexing_moves};
use multiplex::{
    verify_complex_individual, verify_simple_individual, verify_sis_ordering, ComplexBranch, Config, Error, JointPair,
    Profile, ProfileDistribution, TransmissionModel,
};

use crate::input::{check_keys, config_dir, read_config, GraphArgs};
use crate::output::Report;

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// Which ordering to check: 1 and 3 compare one node's infection
    /// probability across every de-multiplexing move (threshold 1 and above 1),
    /// 2 and 4 compare population steady states.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=4))]
    pub prop: u8,
    /// Check parameters. Node-level checks read `edges`, `village`, `nodes`,
    /// `layers`, `node`, `rho`, `tau`, `branch` and model keys (`q`,
    /// `q.<layer>`, `f2.<a>.<b>`, `corr.<a>.<b>`); population checks read
    /// `profiles`, `split`, `share`, `q_grid`, `delta_grid`, `tau`, `branch`.
    #[arg(long)]
    pub config: PathBuf,
    #[command(flatten)]
    pub graph: GraphArgs,
}

fn branch(cfg: &Config) -> Result<Option<ComplexBranch>> {
    match cfg.get_str("branch").unwrap_or("auto") {
        "low" => Ok(Some(ComplexBranch::LowRate)),
        "high" => Ok(Some(ComplexBranch::HighRate)),
        "auto" => Ok(None),
        other => bail!("unknown branch `{other}` (expected low, high or auto)"),
    }
}

fn status_word(r: &PropositionReport) -> &'static str {
    match r.status {
        Status::Pass => "PASS",
        Status::Fail => "FAIL",
        Status::Inconclusive => "SKIP",
    }
}

pub fn verify(mut args: VerifyArgs) -> Result<Report> {
    let mut report = Report::new("verify");
    let cfg = read_config(Some(&args.config))?;
    let base = config_dir(Some(&args.config));
    match args.prop {
        1 | 3 => {
            check_keys(
                &cfg,
                "verify",
                &["edges", "village", "nodes", "layers", "node", "rho", "tau", "branch", "q"],
                &["q", "f2", "corr"],
            )?;
            args.graph.fill_from(&cfg, &base)?;
            individual(&args, &cfg, &mut report)?;
        }
        _ => {
            check_keys(
                &cfg,
                "verify",
                &["profiles", "split", "share", "q_grid", "delta_grid", "tau", "branch"],
                &[],
            )?;
            population(&args, &cfg, &base, &mut report)?;
        }
    }
    report.resolved = cfg;
    report.resolved.set("prop", args.prop);
    report.input(&args.config);
    let total = report.stdout.lines().count();
    let skipped = report.stdout.lines().filter(|l| l.starts_with("SKIP")).count();
    writeln!(
        report.stdout,
        "# {} checks: {} passed, {} failed, {skipped} skipped",
        total,
        total - skipped - report.failures,
        report.failures
    )?;
    Ok(report)
}

fn individual(args: &VerifyArgs, cfg: &Config, report: &mut Report) -> Result<()> {
    let loaded = args.graph.load()?;
    let g = &loaded.graph;
    ensure!(g.layer_count() == 2, "node-level checks need exactly two layers (got {})", g.layer_count());
    let model = TransmissionModel::from_config(cfg, g.layer_names())?;
    let rhos: Vec<f64> = cfg.get_list("rho")?.context("missing `rho`")?;
    let complex = args.prop == 3;
    let tau: u32 = cfg.get_or("tau", if complex { 2 } else { 1 })?;
    ensure!(complex == (tau > 1), "check {} needs a threshold {}", args.prop, if complex { "above 1" } else { "of 1" });
    let chosen = branch(cfg)?;
    let nodes: Vec<usize> = match cfg.get::<usize>("node")? {
        Some(i) => vec![i],
        None => (0..g.node_count()).collect(),
    };
    let mut table = String::from("status,node,donor,recipient,layer,rho,more_mpx,less_mpx,margin\n");
    for &i in &nodes {
        for (mv, g_hat) in enumerate_demultiplexing_moves(g, i)? {
            for &rho in &rhos {
                let layer = &g.layer_names()[mv.layer];
                let head = format!("node={i} donor={} recipient={} layer={layer} rho={rho}", mv.donor, mv.recipient);
                let result = if complex {
                    verify_complex_individual(g, &g_hat, i, rho, &model, tau, chosen)
                } else {
                    verify_simple_individual(g, &g_hat, i, rho, &model)
                };
                let r = match result {
                    Ok(r) => r,
                    Err(Error::Precondition(why)) => {
                        writeln!(report.stdout, "SKIP {head} ({why})")?;
                        writeln!(table, "SKIP,{i},{},{},{layer},{rho},NA,NA,NA", mv.donor, mv.recipient)?;
                        continue;
                    }
                    Err(e) => return Err(e.into()),
                };
                report.failures += (r.status == Status::Fail) as usize;
                let word = status_word(&r);
                writeln!(
                    report.stdout,
                    "{word} {head} more={} less={} margin={:e}",
                    r.more_mpx, r.less_mpx, r.margin
                )?;
                writeln!(
                    table,
                    "{word},{i},{},{},{layer},{rho},{},{},{}",
                    mv.donor, mv.recipient, r.more_mpx, r.less_mpx, r.margin
                )?;
            }
        }
    }
    report.file("verify.csv", table);
    report.input(&loaded.path);
    Ok(())
}

fn parse_profile(text: &str) -> Result<Profile> {
    let parts: Vec<u32> = text
        .split(',')
        .map(|s| s.trim().parse())
        .collect::<std::result::Result<_, _>>()
        .with_context(|| format!("invalid profile `{text}`"))?;
    match parts[..] {
        [a, b, c] => Ok(Profile::new(a, b, c)),
        _ => bail!("a profile has three counts `dA,dB,dAB`, got `{text}`"),
    }
}

fn population(args: &VerifyArgs, cfg: &Config, base: &std::path::Path, report: &mut Report) -> Result<()> {
    let path = base.join(cfg.get_str("profiles").context("missing `profiles`")?);
    let file = std::fs::File::open(&path).with_context(|| format!("cannot open profiles {}", path.display()))?;
    let more = ProfileDistribution::read(file, &path.display().to_string())?;
    let complex = args.prop == 4;
    let tau: u32 = cfg.get_or("tau", if complex { 2 } else { 1 })?;
    ensure!(complex == (tau > 1), "check {} needs a threshold {}", args.prop, if complex { "above 1" } else { "of 1" });
    let chosen = if complex { branch(cfg)? } else { None };
    let share: f64 = cfg.get_or("share", 1.0)?;
    ensure!(share > 0.0 && share <= 1.0, "`share` must lie in (0, 1]");
    let splits: Vec<Profile> = match cfg.get_str("split") {
        Some(s) => vec![parse_profile(s)?],
        None => more.support().filter(|p| p.both > 0).collect(),
    };
    ensure!(!splits.is_empty(), "no profile has a double link to split");
    let q_grid: Vec<f64> = cfg.get_list("q_grid")?.context("missing `q_grid`")?;
    let delta_grid: Vec<f64> = cfg.get_list("delta_grid")?.context("missing `delta_grid`")?;
    let mut table = String::from("status,split,q,delta,more_mpx,less_mpx,margin\n");
    for at in splits {
        let less = demultiplex_distribution(&more, at, share * more.mass(&at))?;
        let label = format!("{},{},{}", at.only_a, at.only_b, at.both);
        for &q in &q_grid {
            let pair = JointPair::independent(q, q)?;
            for &delta in &delta_grid {
                let r = verify_sis_ordering(&more, &less, delta, &pair, tau, chosen)?;
                report.failures += (r.status == Status::Fail) as usize;
                let word = status_word(&r);
                let note = if r.status == Status::Inconclusive { " (zero steady state)" } else { "" };
                writeln!(
                    report.stdout,
                    "{word} split={label} q={q} delta={delta} more={} less={} margin={:e}{note}",
                    r.more_mpx, r.less_mpx, r.margin
                )?;
                writeln!(table, "{word},\"{label}\",{q},{delta},{},{},{}", r.more_mpx, r.less_mpx, r.margin)?;
            }
        }
    }
    report.file("verify.csv", table);
    report.input(&path);
    Ok(())
}
