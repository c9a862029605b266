use std::collections::HashMap;

use serde::Serialize;

use super::PipelineProgram;
use crate::error::{Error, Result};

/// A schedulable unit of the pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(tag = "kind", content = "index", rename_all = "lowercase")]
pub enum Node {
    Table(usize),
    Logic(usize),
}

/// Stage index (0-based) of every table and logic op.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StageSchedule {
    pub table_stage: Vec<usize>,
    pub logic_stage: Vec<usize>,
    pub n_stages: usize,
}

impl StageSchedule {
    /// Nodes grouped by stage; tables precede logic within a stage.
    pub fn stages(&self) -> Vec<Vec<Node>> {
        let mut out = vec![Vec::new(); self.n_stages];
        for (i, &s) in self.table_stage.iter().enumerate() {
            out[s].push(Node::Table(i));
        }
        for (i, &s) in self.logic_stage.iter().enumerate() {
            out[s].push(Node::Logic(i));
        }
        out
    }

    /// All nodes in a dependency-respecting execution order.
    pub fn order(&self) -> Vec<Node> {
        self.stages().into_iter().flatten().collect()
    }
}

fn node_reads(p: &PipelineProgram, n: Node) -> Vec<&str> {
    match n {
        Node::Table(i) => p.tables[i].keys.iter().map(|k| k.field.as_str()).collect(),
        Node::Logic(i) => p.logic[i].reads(),
    }
}

/// Longest-path leveling of the def-use DAG: a node sits one stage after
/// the latest producer of any field it reads. Fails on a dependency cycle.
pub fn stage_schedule(p: &PipelineProgram) -> Result<StageSchedule> {
    let nodes: Vec<Node> = (0..p.tables.len())
        .map(Node::Table)
        .chain((0..p.logic.len()).map(Node::Logic))
        .collect();
    let mut writer: HashMap<&str, Node> = HashMap::new();
    for &n in &nodes {
        match n {
            Node::Table(i) => {
                for f in p.tables[i].written_fields() {
                    writer.insert(f, n);
                }
            }
            Node::Logic(i) => {
                writer.insert(p.logic[i].dst(), n);
            }
        }
    }
    let index = |n: Node| match n {
        Node::Table(i) => i,
        Node::Logic(i) => p.tables.len() + i,
    };
    let deps: Vec<Vec<usize>> = nodes
        .iter()
        .map(|&n| {
            let mut d: Vec<usize> = node_reads(p, n)
                .into_iter()
                .filter_map(|f| writer.get(f).map(|&w| index(w)))
                .collect();
            d.sort_unstable();
            d.dedup();
            d
        })
        .collect();

    // Kahn's algorithm over the reversed edges, computing levels as we go.
    let mut users: Vec<Vec<usize>> = vec![Vec::new(); nodes.len()];
    let mut pending: Vec<usize> = deps.iter().map(Vec::len).collect();
    for (n, d) in deps.iter().enumerate() {
        for &src in d {
            users[src].push(n);
        }
    }
    let mut level = vec![0usize; nodes.len()];
    let mut ready: Vec<usize> = (0..nodes.len()).filter(|&n| pending[n] == 0).collect();
    let mut done = 0;
    while let Some(n) = ready.pop() {
        done += 1;
        for &u in &users[n] {
            level[u] = level[u].max(level[n] + 1);
            pending[u] -= 1;
            if pending[u] == 0 {
                ready.push(u);
            }
        }
    }
    if done < nodes.len() {
        let stuck: Vec<String> = nodes
            .iter()
            .enumerate()
            .filter(|(i, _)| pending[*i] > 0)
            .map(|(_, &n)| match n {
                Node::Table(i) => format!("table `{}`", p.tables[i].name),
                Node::Logic(i) => format!("logic[{i}]"),
            })
            .collect();
        return Err(Error::Program(format!("dependency cycle through {}", stuck.join(", "))));
    }
    let n_stages = level.iter().map(|l| l + 1).max().unwrap_or(0);
    Ok(StageSchedule {
        table_stage: level[..p.tables.len()].to_vec(),
        logic_stage: level[p.tables.len()..].to_vec(),
        n_stages,
    })
}
