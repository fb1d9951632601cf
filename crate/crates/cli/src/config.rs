//! `key = value` training-config files and their merge with flags.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use clap::Args;
use ebm_core::TrainConfig;

#[derive(Args, Debug, Clone, Default)]
pub struct TrainArgs {
    /// Training config file (`key = value` lines); flags take precedence
    #[arg(long, value_name = "FILE")]
    pub config: Option<String>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub max_leaves: Option<usize>,
    #[arg(long = "bags")]
    pub num_bags: Option<usize>,
    #[arg(long)]
    pub max_rounds: Option<usize>,
    /// Patience in rounds; 0 disables early stopping
    #[arg(long)]
    pub early_stop_rounds: Option<usize>,
    #[arg(long)]
    pub inner_val_fraction: Option<f64>,
    /// Number of pairwise terms (K)
    #[arg(long = "interactions")]
    pub num_interactions: Option<usize>,
    #[arg(long)]
    pub max_bins: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Restrict pair detection, e.g. `a:b,c:d`
    #[arg(long = "pair-candidates", value_name = "PAIRS")]
    pub interaction_candidates: Option<String>,
}

fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|p| match p.split_once(':') {
            Some((a, b)) => Ok((a.trim().to_string(), b.trim().to_string())),
            None => bail!("pair `{p}` must look like `a:b`"),
        })
        .collect()
}

fn set<V: std::str::FromStr>(slot: &mut V, key: &str, value: &str) -> Result<()>
where
    V::Err: std::fmt::Display,
{
    *slot = value.parse().map_err(|e| anyhow::anyhow!("bad value `{value}` for `{key}`: {e}"))?;
    Ok(())
}

/// Applies `key = value` lines on top of `base`. Blank lines and `#`
/// comments are skipped; unknown keys are errors.
pub fn apply_config_text(base: &mut TrainConfig, text: &str) -> Result<()> {
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) =
            line.split_once('=').with_context(|| format!("line {}: expected `key = value`", n + 1))?;
        let (key, value) = (key.trim(), value.trim());
        match key {
            "learning_rate" => set(&mut base.learning_rate, key, value)?,
            "max_leaves" => set(&mut base.max_leaves, key, value)?,
            "num_bags" | "bags" => set(&mut base.num_bags, key, value)?,
            "max_rounds" => set(&mut base.max_rounds, key, value)?,
            "early_stop_rounds" => set(&mut base.early_stop_rounds, key, value)?,
            "inner_val_fraction" => set(&mut base.inner_val_fraction, key, value)?,
            "num_interactions" | "interactions" => set(&mut base.num_interactions, key, value)?,
            "max_bins" => set(&mut base.max_bins, key, value)?,
            "seed" => set(&mut base.seed, key, value)?,
            "interaction_candidates" => base.interaction_candidates = Some(parse_pairs(value)?),
            other => bail!("line {}: unknown config key `{other}`", n + 1),
        }
    }
    Ok(())
}

/// Renders a config in the same `key = value` form it is read from.
pub fn config_to_text(c: &TrainConfig) -> String {
    let mut out = format!(
        "learning_rate = {}\nmax_leaves = {}\nnum_bags = {}\nmax_rounds = {}\nearly_stop_rounds = {}\ninner_val_fraction = {}\nnum_interactions = {}\nmax_bins = {}\nseed = {}\n",
        c.learning_rate,
        c.max_leaves,
        c.num_bags,
        c.max_rounds,
        c.early_stop_rounds,
        c.inner_val_fraction,
        c.num_interactions,
        c.max_bins,
        c.seed
    );
    if let Some(pairs) = &c.interaction_candidates {
        let joined: Vec<String> = pairs.iter().map(|(a, b)| format!("{a}:{b}")).collect();
        out.push_str(&format!("interaction_candidates = {}\n", joined.join(",")));
    }
    out
}

impl TrainArgs {
    /// Defaults, then the config file, then explicit flags.
    pub fn resolve(&self) -> Result<TrainConfig> {
        let mut c = TrainConfig::default();
        if let Some(path) = &self.config {
            let text = fs::read_to_string(Path::new(path)).with_context(|| format!("reading config {path}"))?;
            apply_config_text(&mut c, &text).with_context(|| format!("in config {path}"))?;
        }
        macro_rules! over {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { c.$f = v; } )* };
        }
        over!(learning_rate, max_leaves, num_bags, max_rounds, early_stop_rounds, inner_val_fraction, num_interactions, max_bins, seed);
        if let Some(p) = &self.interaction_candidates {
            c.interaction_candidates = Some(parse_pairs(p)?);
        }
        c.validate()?;
        Ok(c)
    }
}
