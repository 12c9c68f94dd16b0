//! Abstract reachability graph.

use std::collections::BTreeSet;

use crate::cfa::Cfa;
use crate::term::{Term, TRUE};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArgNode {
    pub id: usize,
    pub location: usize,
    pub label: Term,
    /// Parent node and the CFA edge leading here.
    pub parent: Option<(usize, usize)>,
    pub children: Vec<usize>,
    pub covered_by: Option<usize>,
    pub expanded_edges: BTreeSet<usize>,
    /// Version of the location's precision the label was computed with.
    pub stamp: u64,
    pub alive: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Arg {
    pub nodes: Vec<ArgNode>,
    pub root: usize,
}

impl Arg {
    pub fn new(initial: usize) -> Self {
        Arg {
            nodes: vec![ArgNode {
                id: 0,
                location: initial,
                label: TRUE,
                parent: None,
                children: Vec::new(),
                covered_by: None,
                expanded_edges: BTreeSet::new(),
                stamp: 0,
                alive: true,
            }],
            root: 0,
        }
    }

    pub fn node(&self, id: usize) -> &ArgNode {
        &self.nodes[id]
    }

    pub fn add_child(&mut self, parent: usize, edge: usize, location: usize, label: Term, stamp: u64) -> usize {
        let id = self.nodes.len();
        self.nodes.push(ArgNode {
            id,
            location,
            label,
            parent: Some((parent, edge)),
            children: Vec::new(),
            covered_by: None,
            expanded_edges: BTreeSet::new(),
            stamp,
            alive: true,
        });
        self.nodes[parent].children.push(id);
        id
    }

    pub fn alive(&self) -> impl Iterator<Item = &ArgNode> {
        self.nodes.iter().filter(|n| n.alive)
    }

    pub fn alive_count(&self) -> usize {
        self.alive().count()
    }

    /// Nodes from the root to `id` and the edges between them.
    pub fn path_to(&self, id: usize) -> (Vec<usize>, Vec<usize>) {
        let mut nodes = vec![id];
        let mut edges = Vec::new();
        let mut cur = id;
        while let Some((p, e)) = self.nodes[cur].parent {
            nodes.push(p);
            edges.push(e);
            cur = p;
        }
        nodes.reverse();
        edges.reverse();
        (nodes, edges)
    }

    /// Deletes the subtree at `id` together with its siblings produced by
    /// the same edge, so that the parent re-expands that edge. Returns the
    /// nodes that must go back on the worklist.
    pub fn prune(&mut self, id: usize) -> Vec<usize> {
        let (parent, edge) = self.nodes[id].parent.expect("the root is never pruned");
        let victims: Vec<usize> = self.nodes[parent]
            .children
            .iter()
            .copied()
            .filter(|&c| self.nodes[c].parent == Some((parent, edge)))
            .collect();
        let mut dead = BTreeSet::new();
        let mut stack = victims.clone();
        while let Some(n) = stack.pop() {
            if dead.insert(n) {
                stack.extend(self.nodes[n].children.iter().copied());
            }
        }
        for &n in &dead {
            let node = &mut self.nodes[n];
            node.alive = false;
            node.covered_by = None;
        }
        self.nodes[parent].children.retain(|c| !victims.contains(c));
        self.nodes[parent].expanded_edges.remove(&edge);
        let mut requeue = vec![parent];
        for node in self.nodes.iter_mut() {
            if node.alive && node.covered_by.is_some_and(|c| dead.contains(&c)) {
                node.covered_by = None;
                requeue.push(node.id);
            }
        }
        requeue
    }

    /// Whether every alive node is covered or fully expanded and no alive
    /// node sits at the error location.
    pub fn is_closed(&self, cfa: &Cfa) -> bool {
        self.alive().all(|n| {
            n.location != cfa.error
                && (n.covered_by.is_some() || cfa.outgoing(n.location).all(|e| n.expanded_edges.contains(&e.id)))
        })
    }

    pub fn to_dot(&self, cfa: &Cfa) -> String {
        let mut out = String::from("digraph arg {\n  node [shape=box];\n");
        for n in self.alive() {
            out.push_str(&format!(
                "  n{} [label=\"{}: {}\"];\n",
                n.id,
                cfa.locations[n.location].name.replace('"', "\\\""),
                n.label.to_string().replace('"', "\\\"")
            ));
        }
        for n in self.alive() {
            if let Some((p, e)) = n.parent {
                out.push_str(&format!("  n{} -> n{} [label=\"e{}\"];\n", p, n.id, e));
            }
            if let Some(c) = n.covered_by {
                out.push_str(&format!("  n{} -> n{} [style=dotted];\n", n.id, c));
            }
        }
        out.push_str("}\n");
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prune_uncovers_and_requeues() {
        let mut arg = Arg::new(0);
        let a = arg.add_child(0, 0, 2, TRUE, 0);
        let b = arg.add_child(a, 1, 3, TRUE, 0);
        let c = arg.add_child(0, 2, 3, TRUE, 0);
        arg.nodes[0].expanded_edges.extend([0, 2]);
        arg.nodes[c].covered_by = Some(b);
        let requeue = arg.prune(a);
        assert!(!arg.node(a).alive && !arg.node(b).alive);
        assert_eq!(arg.node(c).covered_by, None);
        assert_eq!(requeue, vec![0, c]);
        assert_eq!(arg.node(0).children, vec![c]);
        assert!(!arg.node(0).expanded_edges.contains(&0));
        assert_eq!(arg.path_to(c), (vec![0, c], vec![2]));
    }
}
