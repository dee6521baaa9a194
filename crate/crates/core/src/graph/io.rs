//! Line-delimited graph export.
//!
//! Line 1 is a [`GraphHeader`]; every following line is one JSON record,
//! either `{"record":"entity",...}` or `{"record":"relation",...}`. Entities
//! are written in ascending id order and relations in graph order, so equal
//! graphs serialize to identical bytes.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CodeGraph, Entity, GraphError, Language, Relation};

pub const GRAPH_FORMAT_VERSION: u32 = 1;
const GRAPH_FORMAT: &str = "codegraph";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphHeader {
    pub format: String,
    pub version: u32,
    pub language: Language,
    pub content_hash: String,
    pub hash_algorithm: String,
    pub entities: usize,
    pub relations: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "lowercase")]
enum Record {
    Entity(Entity),
    Relation(Relation),
}

pub fn write_graph<W: Write>(graph: &CodeGraph, mut out: W) -> Result<(), GraphError> {
    let header = GraphHeader {
        format: GRAPH_FORMAT.to_string(),
        version: GRAPH_FORMAT_VERSION,
        language: graph.language(),
        content_hash: graph.content_hash().to_string(),
        hash_algorithm: "sha256".to_string(),
        entities: graph.entity_count(),
        relations: graph.relations().len(),
    };
    writeln!(out, "{}", serde_json::to_string(&header).map_err(fmt_err)?)?;
    for e in graph.entities() {
        writeln!(out, "{}", serde_json::to_string(&Record::Entity(e.clone())).map_err(fmt_err)?)?;
    }
    for r in graph.relations() {
        writeln!(out, "{}", serde_json::to_string(&Record::Relation(r.clone())).map_err(fmt_err)?)?;
    }
    Ok(())
}

pub fn read_graph<R: Read>(input: R) -> Result<CodeGraph, GraphError> {
    let mut lines = BufReader::new(input).lines();
    let header_line = lines.next().ok_or_else(|| GraphError::Format("missing header line".into()))??;
    let header: GraphHeader = serde_json::from_str(&header_line).map_err(fmt_err)?;
    if header.format != GRAPH_FORMAT {
        return Err(GraphError::Format(format!("unexpected format `{}`", header.format)));
    }
    if header.version != GRAPH_FORMAT_VERSION {
        return Err(GraphError::Format(format!("unsupported version {}", header.version)));
    }
    let mut entities = Vec::new();
    let mut relations = Vec::new();
    for (n, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(&line).map_err(|e| GraphError::Format(format!("line {}: {e}", n + 2)))? {
            Record::Entity(e) => entities.push(e),
            Record::Relation(r) => relations.push(r),
        }
    }
    let graph = CodeGraph::from_parts(header.language, entities, relations)?;
    if graph.content_hash() != header.content_hash {
        return Err(GraphError::Format("content hash does not match entity bodies".into()));
    }
    Ok(graph)
}

pub fn write_graph_file(graph: &CodeGraph, path: &Path) -> Result<(), GraphError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_graph(graph, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn read_graph_file(path: &Path) -> Result<CodeGraph, GraphError> {
    read_graph(File::open(path)?)
}

fn fmt_err(e: serde_json::Error) -> GraphError {
    GraphError::Format(e.to_string())
}
