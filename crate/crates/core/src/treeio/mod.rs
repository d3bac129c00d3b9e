//! Newick input for three-taxon trees, mapped onto the 3-spider.

mod ingest;
mod newick;
mod tritree;

pub use ingest::{ingest_corpus, IngestReport, IngestedTree, Skip};
pub use newick::{parse_newick, parse_newick_at, split_records, NewickError, NewickTree, Node};
pub use tritree::{
    emit_newick, induce_tritree, parse_newick_tritree, tritree_to_spider, LegAssignment, TreeError, TriTree,
};
