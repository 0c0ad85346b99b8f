//! Capacitated digraphs: the data model, generators, metrics and file I/O.

mod digraph;
pub mod gen;
mod io;
mod metrics;

pub use digraph::{Digraph, Edge, GraphMeta};
pub use gen::{augment_host_bottleneck, puncture, NodeMapping, PunctureMode};
pub use io::{from_json, load_graph, save_graph, to_json};
pub use metrics::{all_pairs_distances, bfs_distances, diameter, distance_sum, distances_to, is_strongly_connected, UNREACHABLE};
