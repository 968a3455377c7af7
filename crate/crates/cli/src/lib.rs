//! Subcommand implementations for the `rnas` binary.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use rnas_core::arch::{deserialize, to_dot, SeedKind};
use rnas_core::persist::RunDirectory;
use rnas_core::search::{build_task, evaluate_seed, run_search_with, Objective, SearchConfig};
use rnas_core::tasks::{Dataset, DatasetManifest};

pub fn load_config(path: &Path, seed: Option<u64>) -> Result<SearchConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let mut config = SearchConfig::from_json(&text).with_context(|| format!("parsing config {}", path.display()))?;
    if let Some(s) = seed {
        config.seed = s;
    }
    Ok(config)
}

/// Runs a search and materializes its run directory under `out_dir`.
pub fn cmd_search(config_path: &Path, out_dir: &Path, seed: Option<u64>) -> Result<()> {
    let config = load_config(config_path, seed)?;
    if out_dir.exists() && fs::read_dir(out_dir)?.next().is_some() {
        bail!("output directory {} is not empty", out_dir.display());
    }
    let task = build_task(&config)?;
    let run = RunDirectory::create(out_dir, &config).with_context(|| format!("creating {}", out_dir.display()))?;
    let state = run_search_with(&config, &task, |s| run.write_generation(s))?;
    run.write_checkpoints(&state)?;
    let best = state.stats.last().map(|s| s.best_loss).unwrap_or(f64::NAN);
    log::info!("search finished: {} archived, best loss {best}", state.archive.len());
    Ok(())
}

/// Renders a stored architecture document as DOT, to `dot_out` or stdout.
pub fn cmd_render(arch_path: &Path, dot_out: Option<&Path>) -> Result<String> {
    let text = fs::read_to_string(arch_path).with_context(|| format!("reading {}", arch_path.display()))?;
    let arch = deserialize(&text).with_context(|| format!("loading {}", arch_path.display()))?;
    let dot = to_dot(&arch);
    if let Some(p) = dot_out {
        fs::write(p, &dot).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(dot)
}

/// Writes `count` aⁿbⁿcⁿ strings to `out_path` plus a manifest next to it.
pub fn cmd_dataset(manifest: DatasetManifest, out_path: &Path) -> Result<()> {
    let data = Dataset::generate(manifest)?;
    data.write(out_path).with_context(|| format!("writing {}", out_path.display()))?;
    Ok(())
}

/// Trains the three seed encodings on the configured task and returns a table.
pub fn cmd_baselines(config_path: &Path, seed: Option<u64>, csv: bool) -> Result<String> {
    let config = load_config(config_path, seed)?;
    let task = build_task(&config)?;
    let loss_at = config.objectives.iter().position(|o| *o == Objective::TestLoss);
    let mut rows = Vec::new();
    for kind in [SeedKind::BasicRnn, SeedKind::Lstm, SeedKind::Gru] {
        let (member, objectives) = evaluate_seed(&config, &task, kind);
        let loss = match (member.loss, loss_at) {
            (Some(l), _) => l.to_string(),
            (None, Some(i)) => format!("{} (penalty)", objectives.values[i]),
            (None, None) => "diverged".to_string(),
        };
        rows.push([member.arch.identifier.to_string(), loss, member.arch.block_count().to_string(), member.param_count.to_string()]);
    }
    let header = ["identifier", "test_loss", "block_count", "param_count"];
    let mut out = String::new();
    if csv {
        writeln!(out, "{}", header.join(","))?;
        for r in &rows {
            writeln!(out, "{}", r.join(","))?;
        }
    } else {
        let widths: Vec<usize> =
            (0..4).map(|c| rows.iter().map(|r| r[c].len()).chain([header[c].len()]).max().unwrap_or(0)).collect();
        let line = |cells: [&str; 4]| {
            cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect::<Vec<_>>().join("  ").trim_end().to_string()
        };
        writeln!(out, "{}", line(header))?;
        for r in &rows {
            writeln!(out, "{}", line([&r[0], &r[1], &r[2], &r[3]]))?;
        }
    }
    Ok(out)
}
