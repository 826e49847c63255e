use std::collections::BTreeSet;
use std::fmt::Write;

use super::TraceMeta;
use crate::search::TraceNode;

/// Graphviz description of a search trace. The selected path is drawn bold,
/// goal nodes as double circles. With `plan_only`, only the path is kept.
pub fn render_dot(meta: &TraceMeta, trace: &[TraceNode], plan_only: bool) -> String {
    let mut path = BTreeSet::new();
    let mut cur = meta.selected;
    while let Some(id) = cur {
        path.insert(id);
        cur = trace.get(id).and_then(|n| n.parent);
    }
    if !trace.is_empty() {
        path.insert(0);
    }
    let mut s = String::new();
    let title = format!("{} {} seed {}", meta.method, meta.scene, meta.seed);
    let _ = writeln!(s, "digraph search {{");
    let _ = writeln!(s, "  label=\"{title}\";");
    let _ = writeln!(s, "  node [shape=circle, fontsize=9];");
    for n in trace {
        let on_path = path.contains(&n.id);
        if plan_only && !on_path {
            continue;
        }
        let mut attrs = vec![format!("label=\"{}\\nh={:.3}\\ng={:.3}\"", n.id, n.h, n.g)];
        if n.is_goal {
            attrs.push("shape=doublecircle".into());
        }
        if on_path {
            attrs.push("style=filled, fillcolor=lightblue".into());
        } else if n.expansions == 0 {
            attrs.push("color=gray".into());
        }
        let _ = writeln!(s, "  n{} [{}];", n.id, attrs.join(", "));
    }
    for n in trace {
        let Some(p) = n.parent else { continue };
        let on_path = path.contains(&n.id);
        if plan_only && !on_path {
            continue;
        }
        let object = n.action.as_ref().map(|a| a.object.to_string()).unwrap_or_default();
        let style = if on_path { ", penwidth=2" } else { "" };
        let _ = writeln!(s, "  n{p} -> n{} [label=\"{object}\"{style}];", n.id);
    }
    s.push_str("}\n");
    s
}
