//! Graph export in GraphML and DOT form. Nodes carry their area id and
//! community; edges carry their weight; DOT nodes also carry a size
//! annotation equal to their degree.

use std::io::Write;

use crate::error::{Error, Result};
use crate::network::{CommunityPartition, CoordinationNetwork};

fn xml_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

fn community_of(
    partition: &CommunityPartition,
    node: &str,
) -> Result<usize> {
    partition
        .community
        .get(node)
        .copied()
        .ok_or_else(|| Error::invalid(format!("partition misses node `{node}`")))
}

pub fn write_graphml(
    mut w: impl Write,
    net: &CoordinationNetwork,
    partition: &CommunityPartition,
) -> Result<()> {
    writeln!(w, r#"<?xml version="1.0" encoding="UTF-8"?>"#)?;
    writeln!(
        w,
        r#"<graphml xmlns="http://graphml.graphdrawing.org/xmlns">"#
    )?;
    writeln!(
        w,
        r#"  <key id="d0" for="node" attr.name="area_id" attr.type="string"/>"#
    )?;
    writeln!(
        w,
        r#"  <key id="d1" for="node" attr.name="community" attr.type="int"/>"#
    )?;
    writeln!(
        w,
        r#"  <key id="d2" for="edge" attr.name="weight" attr.type="double"/>"#
    )?;
    writeln!(w, r#"  <graph id="G" edgedefault="undirected">"#)?;
    for (i, node) in net.nodes.iter().enumerate() {
        let community = community_of(partition, node)?;
        writeln!(
            w,
            r#"    <node id="n{i}"><data key="d0">{}</data><data key="d1">{community}</data></node>"#,
            xml_escape(node)
        )?;
    }
    for e in &net.edges {
        writeln!(
            w,
            r#"    <edge source="n{}" target="n{}"><data key="d2">{}</data></edge>"#,
            e.a, e.b, e.weight
        )?;
    }
    writeln!(w, "  </graph>")?;
    writeln!(w, "</graphml>")?;
    Ok(())
}

pub fn write_dot(
    mut w: impl Write,
    net: &CoordinationNetwork,
    partition: &CommunityPartition,
) -> Result<()> {
    let degrees = net.degrees();
    writeln!(w, "graph coordination {{")?;
    for (i, node) in net.nodes.iter().enumerate() {
        let community = community_of(partition, node)?;
        writeln!(
            w,
            r#"  "{}" [area_id="{}", community={community}, size={}];"#,
            dot_escape(node),
            dot_escape(node),
            degrees[i]
        )?;
    }
    for e in &net.edges {
        writeln!(
            w,
            r#"  "{}" -- "{}" [weight={}];"#,
            dot_escape(&net.nodes[e.a]),
            dot_escape(&net.nodes[e.b]),
            e.weight
        )?;
    }
    writeln!(w, "}}")?;
    Ok(())
}
