//! Run directories: config snapshot, statistics, archive, Pareto table,
//! genotype documents, DOT renders, checkpoints and a summary chart.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use crate::arch::{serialize, to_dot, Architecture};
use crate::evo::dominates;
use crate::search::{GenerationStats, RunState, SearchConfig};

pub const STATS_HEADER: &str =
    "generation,population,mean_block_count,mean_loss,best_loss,mean_param_count,front_sizes,evaluated,cache_hits,penalized";

pub struct RunDirectory {
    root: PathBuf,
}

fn invalid(msg: String) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg)
}

impl RunDirectory {
    /// Creates `root` and writes the config snapshot before anything else.
    pub fn create(root: &Path, config: &SearchConfig) -> io::Result<Self> {
        fs::create_dir_all(root.join("architectures"))?;
        fs::create_dir_all(root.join("checkpoints"))?;
        fs::write(root.join("config.json"), config.to_json())?;
        Ok(RunDirectory { root: root.to_path_buf() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn architecture_path(&self, id: &str) -> PathBuf {
        self.root.join("architectures").join(format!("{id}.json"))
    }

    fn write_architecture(&self, arch: &Architecture) -> io::Result<()> {
        let id = arch.identifier.to_string();
        fs::write(self.architecture_path(&id), serialize(arch) + "\n")?;
        fs::write(self.root.join("architectures").join(format!("{id}.dot")), to_dot(arch))
    }

    /// Rewrites every per-generation file from `state`.
    pub fn write_generation(&self, state: &RunState) -> io::Result<()> {
        for arch in &state.evaluated {
            self.write_architecture(arch)?;
        }
        fs::write(self.root.join("stats.csv"), stats_csv(&state.stats))?;

        let mut archive = String::new();
        for e in &state.archive {
            archive.push_str(&serde_json::to_string(e).map_err(io::Error::other)?);
            archive.push('\n');
        }
        fs::write(self.root.join("archive.jsonl"), archive)?;

        let mut timings = String::from("generation,identifier,seconds\n");
        for t in &state.timings {
            writeln!(timings, "{},{},{:.6}", t.generation, t.identifier, t.seconds).expect("string write");
        }
        fs::write(self.root.join("timings.csv"), timings)?;

        fs::write(self.root.join("pareto.csv"), pareto_csv(state)?)?;
        fs::write(self.root.join("chart.svg"), stats_svg(&state.stats))
    }

    /// Writes parameter checkpoints of the final population.
    pub fn write_checkpoints(&self, state: &RunState) -> io::Result<()> {
        for ind in &state.population {
            let m = &state.members[&ind.id];
            fs::write(self.root.join("checkpoints").join(format!("{}.json", ind.id)), m.params.to_checkpoint() + "\n")?;
        }
        Ok(())
    }
}

pub fn stats_csv(stats: &[GenerationStats]) -> String {
    let mut out = String::from(STATS_HEADER);
    out.push('\n');
    for s in stats {
        let fronts: Vec<String> = s.front_sizes.iter().map(usize::to_string).collect();
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            s.generation,
            s.population,
            s.mean_block_count,
            s.mean_loss,
            s.best_loss,
            s.mean_param_count,
            fronts.join(";"),
            s.evaluated,
            s.cache_hits,
            s.penalized
        )
        .expect("string write");
    }
    out
}

/// The current first front, one row per individual. Fails if any two rows
/// dominate one another.
pub fn pareto_csv(state: &RunState) -> io::Result<String> {
    let mut front: Vec<_> = state.pareto_front();
    front.sort_by(|a, b| a.id.cmp(&b.id));
    for a in &front {
        for b in &front {
            if dominates(&a.objectives, &b.objectives).map_err(|e| invalid(e.to_string()))? {
                return Err(invalid(format!("pareto row {} dominates {}", a.id, b.id)));
            }
        }
    }
    let labels: Vec<String> = state
        .config
        .objectives
        .iter()
        .map(|o| serde_json::to_value(o).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default())
        .collect();
    let mut out = format!("identifier,parent,{},param_count\n", labels.join(","));
    for ind in front {
        let m = &state.members[&ind.id];
        let values: Vec<String> = ind.objectives.values.iter().map(f64::to_string).collect();
        writeln!(out, "{},{},{},{}", ind.id, ind.parent.as_deref().unwrap_or(""), values.join(","), m.param_count)
            .expect("string write");
    }
    Ok(out)
}

fn polyline(points: &[(f64, f64)], x0: f64, y0: f64, w: f64, h: f64, color: &str) -> String {
    let (xs, ys): (Vec<f64>, Vec<f64>) = points.iter().copied().unzip();
    let (xmin, xmax) = (xs.iter().copied().fold(f64::INFINITY, f64::min), xs.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    let (ymin, ymax) = (ys.iter().copied().fold(f64::INFINITY, f64::min), ys.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    let sx = |x: f64| if xmax > xmin { x0 + (x - xmin) / (xmax - xmin) * w } else { x0 + w / 2.0 };
    let sy = |y: f64| if ymax > ymin { y0 + h - (y - ymin) / (ymax - ymin) * h } else { y0 + h / 2.0 };
    let pts: Vec<String> = points.iter().map(|(x, y)| format!("{:.1},{:.1}", sx(*x), sy(*y))).collect();
    format!(
        "  <polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"2\" points=\"{}\"/>\n  <text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\">{ymax:.4}</text>\n  <text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\">{ymin:.4}</text>\n",
        pts.join(" "),
        x0 - 55.0,
        y0 + 10.0,
        x0 - 55.0,
        y0 + h
    )
}

/// Two stacked line charts: mean block count, and mean and best test loss.
pub fn stats_svg(stats: &[GenerationStats]) -> String {
    let (w, h) = (520.0, 180.0);
    let mut svg = String::from(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"460\" font-family=\"sans-serif\">\n",
    );
    svg.push_str("  <rect width=\"640\" height=\"460\" fill=\"white\"/>\n");
    svg.push_str("  <text x=\"70\" y=\"20\" font-size=\"13\">mean block count per generation</text>\n");
    svg.push_str("  <text x=\"70\" y=\"245\" font-size=\"13\">test loss per generation (mean: blue, best: red)</text>\n");
    if !stats.is_empty() {
        let gens: Vec<f64> = stats.iter().map(|s| s.generation as f64).collect();
        let blocks: Vec<(f64, f64)> = gens.iter().zip(stats).map(|(g, s)| (*g, s.mean_block_count)).collect();
        let mean: Vec<(f64, f64)> = gens.iter().zip(stats).map(|(g, s)| (*g, s.mean_loss)).collect();
        let best: Vec<(f64, f64)> = gens.iter().zip(stats).map(|(g, s)| (*g, s.best_loss)).collect();
        svg.push_str(&polyline(&blocks, 70.0, 30.0, w, h, "black"));
        svg.push_str(&polyline(&mean, 70.0, 255.0, w, h, "steelblue"));
        svg.push_str(&polyline(&best, 70.0, 255.0, w, h, "firebrick"));
    }
    svg.push_str("</svg>\n");
    svg
}
