use std::fmt::Write;

use super::{Architecture, BlockKind};

/// Schema tag written into every DOT render.
pub const DOT_SCHEMA: &str = "rnas-dot/1";

/// Graphviz rendering: one node per block, one edge per input reference.
pub fn to_dot(arch: &Architecture) -> String {
    let mut out = String::new();
    writeln!(out, "// schema: {DOT_SCHEMA}").unwrap();
    writeln!(out, "digraph \"{}\" {{", arch.identifier).unwrap();
    writeln!(out, "  rankdir=BT;").unwrap();
    for b in arch.blocks() {
        let shape = match b.kind {
            k if k.is_input() || k.is_output() => "box",
            BlockKind::Combination(_) => "circle",
            _ => "ellipse",
        };
        writeln!(out, "  {} [label=\"{}\\n{}\", shape={}];", b.id, b.kind.label(), b.id, shape).unwrap();
    }
    for b in arch.blocks() {
        for i in &b.inputs {
            writeln!(out, "  {} -> {};", i, b.id).unwrap();
        }
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arch::encode_basic_rnn;

    fn node_lines(dot: &str) -> usize {
        dot.lines().filter(|l| l.contains("[label=")).count()
    }

    #[test]
    fn basic_rnn_render() {
        let a = encode_basic_rnn();
        let dot = to_dot(&a);
        assert_eq!(node_lines(&dot), 10);
        assert_eq!(node_lines(&dot), a.block_count());
        // add (b5) feeds tanh (b6)
        assert!(dot.contains("b5 [label=\"add\\nb5\""));
        assert!(dot.contains("b6 [label=\"tanh\\nb6\""));
        assert!(dot.contains("  b5 -> b6;"));
        let edges = dot.lines().filter(|l| l.contains("->")).count();
        assert_eq!(edges, a.blocks().map(|b| b.inputs.len()).sum::<usize>());
    }
}
